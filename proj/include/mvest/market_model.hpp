#pragma once

// Ground-truth market description: an SPD covariance matrix plus a mean
// vector, with the covariance families and mean specs used as test
// fixtures, and JSON/CSV loaders for external model files.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvest/errors.hpp"
#include "mvest/rng.hpp"

namespace mvest {

/// Philox domain used when a mean spec draws random entries.
inline constexpr std::uint64_t kMeanDomain = 1;

/// True covariance and true means. The covariance is symmetrized on input
/// and factorized once; instances are immutable and safe to share across
/// threads.
class MarketModel {
public:
    /// Relative asymmetry above this rejects the input outright.
    static constexpr double kSymmetryTol = 1e-12;
    /// Cholesky pivots (squared diagonal of L) must exceed this times the
    /// largest diagonal entry of the covariance.
    static constexpr double kPivotTol = 1e-10;

    MarketModel(Eigen::MatrixXd covariance, Eigen::VectorXd means)
        : covariance_(std::move(covariance)), means_(std::move(means)) {
        const auto n = covariance_.rows();
        if (n < 1 || covariance_.cols() != n) {
            throw ConfigError("covariance must be a square matrix");
        }
        if (means_.size() != n) {
            throw ConfigError("means length must match covariance dimension");
        }
        if (!covariance_.allFinite() || !means_.allFinite()) {
            throw ConfigError("model entries must be finite");
        }
        const double scale = covariance_.cwiseAbs().maxCoeff();
        const double asym = (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
        if (asym > kSymmetryTol * std::max(scale, 1e-300)) {
            throw NotPositiveDefinite(
                "covariance violates the symmetry tolerance (relative asymmetry " +
                std::to_string(asym / std::max(scale, 1e-300)) + ")");
        }
        covariance_ = ((covariance_ + covariance_.transpose()) / 2.0).eval();
        llt_.compute(covariance_);
        if (llt_.info() != Eigen::Success) {
            throw NotPositiveDefinite("covariance is not positive definite (Cholesky failed)");
        }
        const double max_diag = covariance_.diagonal().maxCoeff();
        const Eigen::VectorXd ldiag = llt_.matrixLLT().diagonal();
        for (Eigen::Index i = 0; i < n; ++i) {
            const double pivot = ldiag[i] * ldiag[i];
            if (!(pivot > kPivotTol * max_diag)) {
                throw NotPositiveDefinite("covariance is not positive definite (pivot " +
                                          std::to_string(i) + " below tolerance)");
            }
        }
    }

    int n_assets() const { return static_cast<int>(means_.size()); }
    const Eigen::MatrixXd& covariance() const { return covariance_; }
    const Eigen::VectorXd& means() const { return means_; }

    /// Lower-triangular factor D with D D^T = covariance.
    Eigen::MatrixXd cholesky_lower() const { return llt_.matrixL(); }

    /// Solve covariance * x = rhs through the cached factorization.
    Eigen::VectorXd solve_spd(const Eigen::VectorXd& rhs) const { return llt_.solve(rhs); }

    /// Tr ln(covariance), from the cached factor.
    double trace_log() const {
        return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
    }

private:
    Eigen::MatrixXd covariance_;
    Eigen::VectorXd means_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

/// Parametric covariance fixtures for the universality experiments.
struct CovarianceFamily {
    enum class Kind { identity, toeplitz, one_factor, custom };

    Kind kind = Kind::identity;
    double rho = 0.0;    // toeplitz: Sigma_ij = rho^|i-j|, |rho| < 1
    double load = 0.0;   // one_factor: Sigma = load^2 * ones + idio * I
    double idio = 0.0;
    Eigen::MatrixXd custom;

    static CovarianceFamily identity() { return {}; }

    static CovarianceFamily toeplitz(double rho) {
        CovarianceFamily f;
        f.kind = Kind::toeplitz;
        f.rho = rho;
        return f;
    }

    static CovarianceFamily one_factor(double load, double idio) {
        CovarianceFamily f;
        f.kind = Kind::one_factor;
        f.load = load;
        f.idio = idio;
        return f;
    }

    static CovarianceFamily custom_matrix(Eigen::MatrixXd sigma) {
        CovarianceFamily f;
        f.kind = Kind::custom;
        f.custom = std::move(sigma);
        return f;
    }

    std::string label() const {
        std::ostringstream os;
        switch (kind) {
            case Kind::identity: os << "identity"; break;
            case Kind::toeplitz: os << "toeplitz(" << rho << ")"; break;
            case Kind::one_factor: os << "one_factor(" << load << "," << idio << ")"; break;
            case Kind::custom: os << "custom"; break;
        }
        return os.str();
    }

    Eigen::MatrixXd materialize(int n) const {
        if (n < 1) throw std::invalid_argument("n_assets must be positive");
        switch (kind) {
            case Kind::identity:
                return Eigen::MatrixXd::Identity(n, n);
            case Kind::toeplitz: {
                if (!(std::abs(rho) < 1.0)) {
                    throw std::invalid_argument("toeplitz family requires |rho| < 1");
                }
                Eigen::MatrixXd sigma(n, n);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) sigma(i, j) = std::pow(rho, std::abs(i - j));
                return sigma;
            }
            case Kind::one_factor: {
                if (!(idio > 0.0)) {
                    throw std::invalid_argument("one_factor family requires idio > 0");
                }
                Eigen::MatrixXd sigma =
                    Eigen::MatrixXd::Constant(n, n, load * load) +
                    idio * Eigen::MatrixXd::Identity(n, n);
                return sigma;
            }
            case Kind::custom:
                if (custom.rows() != n || custom.cols() != n) {
                    throw std::invalid_argument("custom covariance has wrong dimensions");
                }
                return custom;
        }
        throw std::logic_error("unreachable");
    }
};

/// How to fill the true mean vector of a generated model.
struct MeanSpec {
    enum class Kind { linspace, random, custom };

    Kind kind = Kind::linspace;
    double lo = 0.0, hi = 1.0;
    std::uint64_t seed = 0;
    Eigen::VectorXd values;

    static MeanSpec linspace(double lo, double hi) {
        MeanSpec m;
        m.kind = Kind::linspace;
        m.lo = lo;
        m.hi = hi;
        return m;
    }

    static MeanSpec random(std::uint64_t seed) {
        MeanSpec m;
        m.kind = Kind::random;
        m.seed = seed;
        return m;
    }

    static MeanSpec custom(Eigen::VectorXd v) {
        MeanSpec m;
        m.kind = Kind::custom;
        m.values = std::move(v);
        return m;
    }

    Eigen::VectorXd materialize(int n) const {
        switch (kind) {
            case Kind::linspace:
                return Eigen::VectorXd::LinSpaced(n, lo, hi);
            case Kind::random: {
                const rng::NormalStream stream(seed, kMeanDomain);
                Eigen::VectorXd mu(n);
                for (int i = 0; i < n; ++i) mu[i] = stream(static_cast<std::uint64_t>(i));
                return mu;
            }
            case Kind::custom:
                if (values.size() != n) {
                    throw std::invalid_argument("custom means have wrong length");
                }
                return values;
        }
        throw std::logic_error("unreachable");
    }
};

/// Build a MarketModel from a covariance family and a mean spec. Rejects
/// mean vectors that are numerically proportional to the ones vector,
/// since those make the return constraint degenerate.
inline MarketModel make_family(const CovarianceFamily& family, int n_assets,
                               const MeanSpec& mean_spec) {
    Eigen::MatrixXd sigma = family.materialize(n_assets);
    Eigen::VectorXd mu = mean_spec.materialize(n_assets);
    const double center = mu.mean();
    const double spread = (mu.array() - center).abs().maxCoeff();
    const double scale = std::max({1.0, std::abs(center), mu.cwiseAbs().maxCoeff()});
    if (spread <= 1e-12 * scale) {
        throw DegenerateReturns("mean spec produced means collinear with the ones vector");
    }
    return MarketModel(std::move(sigma), std::move(mu));
}

// ---------------------------------------------------------------------------
// File loaders. JSON: {"covariance": [[...], ...], "means": [...]}.
// CSV: an NxN block of covariance rows followed by one row of N means;
// blank lines and lines starting with '#' are skipped.

inline MarketModel load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file " + path + " is not valid JSON: " + e.what());
    }
    if (!j.contains("covariance") || !j.contains("means")) {
        throw ConfigError("model JSON must contain \"covariance\" and \"means\"");
    }
    const auto& jc = j["covariance"];
    const auto& jm = j["means"];
    if (!jc.is_array() || jc.empty() || !jm.is_array()) {
        throw ConfigError("model JSON fields have the wrong shape");
    }
    const std::size_t n = jc.size();
    Eigen::MatrixXd sigma(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!jc[i].is_array() || jc[i].size() != n) {
            throw ConfigError("covariance must be an NxN array of arrays");
        }
        for (std::size_t k = 0; k < n; ++k) sigma(i, k) = jc[i][k].get<double>();
    }
    if (jm.size() != n) throw ConfigError("means length must match covariance dimension");
    Eigen::VectorXd mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = jm[i].get<double>();
    return MarketModel(std::move(sigma), std::move(mu));
}

inline MarketModel load_model_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ConfigError("model CSV has a non-numeric cell: " + cell);
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.size() < 2) throw ConfigError("model CSV needs an NxN block plus a means row");
    const std::size_t n = rows.size() - 1;
    Eigen::MatrixXd sigma(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (rows[i].size() != n) {
            throw ConfigError("model CSV covariance block is not square");
        }
        for (std::size_t k = 0; k < n; ++k) sigma(i, k) = rows[i][k];
    }
    if (rows[n].size() != n) throw ConfigError("model CSV means row has the wrong length");
    Eigen::VectorXd mu(n);
    for (std::size_t i = 0; i < n; ++i) mu[i] = rows[n][i];
    return MarketModel(std::move(sigma), std::move(mu));
}

/// Dispatch on extension: ".json" -> JSON, anything else -> CSV.
inline MarketModel load_model(const std::string& path) {
    const auto dot = path.rfind('.');
    if (dot != std::string::npos) {
        std::string ext = path.substr(dot + 1);
        for (auto& c : ext) c = static_cast<char>(std::tolower(c));
        if (ext == "json") return load_model_json(path);
    }
    return load_model_csv(path);
}

}  // namespace mvest
