#pragma once

#include <Eigen/Core>

#include "windmpc/errors.hpp"

namespace windmpc {

// Centralized plaintext Lasso (coordinate descent on standardized columns),
// the linear accuracy baseline. Minimizes (1/2n)*||y - Xb||^2 + alpha*|b|_1.
struct LassoModel {
    Eigen::VectorXd coef;  // original feature scale
    double intercept = 0.0;
};

LassoModel lasso_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                     double alpha = 0.00005, int max_iter = 1000,
                     double tol = 1e-7);

Eigen::VectorXd lasso_predict(const LassoModel& m, const Eigen::MatrixXd& X);

}  // namespace windmpc
