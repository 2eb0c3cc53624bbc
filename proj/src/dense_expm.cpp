#include "rsctmdp/dense_expm.hpp"

#include <algorithm>
#include <cmath>

#include "rsctmdp/errors.hpp"

namespace rsctmdp {

Eigen::MatrixXd dense_expm(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw ValidationError("dense_expm: matrix is not square");
    const Eigen::Index n = a.rows();
    if (n == 0) return a;
    if (!a.allFinite()) throw NumericalError("dense_expm: non-finite entry");

    constexpr double kTheta13 = 5.371920351148152;
    constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
                            129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
                            1323241920.0,        40840800.0,          960960.0,           16380.0,
                            182.0,               1.0};

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    // The LU solve below rounds b0 / b0, so return exp(0) = I exactly.
    if (norm1 == 0.0) return Eigen::MatrixXd::Identity(n, n);
    int squarings = 0;
    if (norm1 > kTheta13) squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    const Eigen::MatrixXd x = a / std::ldexp(1.0, squarings);

    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd x2 = x * x;
    const Eigen::MatrixXd x4 = x2 * x2;
    const Eigen::MatrixXd x6 = x4 * x2;
    const Eigen::MatrixXd u =
        x * (x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2) + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
    const Eigen::MatrixXd v =
        x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 + b[2] * x2 + b[0] * id;
    Eigen::MatrixXd r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = r * r;
    return r;
}

}  // namespace rsctmdp
