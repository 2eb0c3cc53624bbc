#pragma once

#include <Eigen/Dense>

namespace rsctmdp {

/// Matrix exponential by scaling and squaring with the degree-13 Pade
/// approximant (Higham 2005).
Eigen::MatrixXd dense_expm(const Eigen::MatrixXd& a);

}  // namespace rsctmdp
