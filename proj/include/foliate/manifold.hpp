#pragma once

#include <iosfwd>

#include "foliate/foliation.hpp"
#include "foliate/polynomial.hpp"

namespace foliate {

/// W(z, θ) = (W∥, W⊥) with U(W(z, θ), θ) = z and V(W(z, θ), θ) = 0 up to
/// order σ. Outputs are the stacked (x∥, x⊥) coordinates.
struct DecoderPoly {
  int dim_z = 0, dim_zc = 0;
  RealPoly W;  // nout = dim_z + dim_zc, nvars = dim_z
};

/// Fixed-point iteration W ← B⁻¹[z − Uᶜ − Uⁿˡ(W); −Vᶜ − Vⁿˡ(W)] with
/// B = [[I, Uˡ], [Vˡ, I]] node-wise. Runs σ iterations, continued until the
/// update vanishes when the encoders have constant terms.
DecoderPoly recover_manifold(const FoliationModel& m, int max_iter = 500);

/// ‖U(W(z,θ),θ) − z‖ and ‖V(W(z,θ),θ)‖ at a point.
double manifold_residual(const FoliationModel& m, const DecoderPoly& d, const Eigen::VectorXd& z,
                         double theta);

void write_decoder(std::ostream& os, const DecoderPoly& d);
DecoderPoly read_decoder(std::istream& is, const CollocationGrid& grid);

}  // namespace foliate
