#include "windmpc/lasso.hpp"

#include <cmath>

namespace windmpc {

namespace {

double soft_threshold(double x, double t) {
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace

LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     double alpha, int max_iter, double tol) {
    const Eigen::Index n = X.rows(), p = X.cols();
    if (n == 0 || n != y.size()) throw LengthError("lasso shape mismatch");
    if (alpha < 0) throw ConfigError("alpha must be >= 0");

    // Standardize columns; constant columns stay zeroed out.
    Eigen::VectorXd mean = X.colwise().mean();
    Eigen::VectorXd sd(p);
    Eigen::MatrixXd Z(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        Eigen::VectorXd c = X.col(j).array() - mean(j);
        double v = std::sqrt(c.squaredNorm() / n);
        sd(j) = v;
        Z.col(j) = v > 0 ? (c / v).eval() : Eigen::VectorXd::Zero(n);
    }
    const double ybar = y.mean();
    Eigen::VectorXd yc = y.array() - ybar;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd resid = yc;  // yc - Z*beta
    for (int it = 0; it < max_iter; ++it) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (sd(j) == 0) continue;
            // With unit-variance columns the coordinate denominator is 1.
            const double rho = Z.col(j).dot(resid) / n + beta(j);
            const double nb = soft_threshold(rho, alpha);
            const double delta = nb - beta(j);
            if (delta != 0.0) {
                resid -= delta * Z.col(j);
                beta(j) = nb;
                max_change = std::max(max_change, std::abs(delta));
            }
        }
        if (max_change < tol) break;
    }

    LassoModel m;
    m.coef = Eigen::VectorXd::Zero(p);
    double shift = 0.0;
    for (Eigen::Index j = 0; j < p; ++j)
        if (sd(j) > 0) {
            m.coef(j) = beta(j) / sd(j);
            shift += m.coef(j) * mean(j);
        }
    m.intercept = ybar - shift;
    return m;
}

Eigen::VectorXd lasso_predict(const LassoModel& m, const Eigen::MatrixXd& X) {
    if (X.cols() != m.coef.size()) throw ShapeError("lasso feature mismatch");
    return (X * m.coef).array() + m.intercept;
}

}  // namespace windmpc
