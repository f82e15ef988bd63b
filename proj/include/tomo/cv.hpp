#pragma once

#include <string>
#include <vector>

#include "tomo/pom.hpp"

namespace tomo {

// Normalized Hermite functions psi_0..psi_nmax at x (stable recurrence).
std::vector<double> hermite_functions(int nmax, double x);
// <n|x_theta> = e^{-i n theta} <n|x>
cplx quadrature_wavefunction(int n, double x, double theta);

struct QuadratureSetting {
  double theta = 0.0;
  std::vector<double> xs;
  double weight = 1.0;
};
// Four angles with five sample points each.
std::vector<QuadratureSetting> default_homodyne_settings();
// Rank-1 outcomes |x_theta><x_theta| truncated to D_sub, scaled so G <= 1.
Pom homodyne_pom(int dsub, const std::vector<QuadratureSetting>& settings);

Mat parity_operator(int d);
// W(x, p) with W(0,0) = 2 for the vacuum and (1/2pi) int W dx dp = 1.
double wigner_fock(const Mat& rho, double x, double p);
// Interpolating quasi-probability; equals the Wigner function at tau = 1/2.
double nonclassicality_r(const Mat& rho, double x, double p, double tau);
// Closed form for the truncated laser state.
double laser_r_ss(double mu, int dsub, double x, double p, double tau);

struct DepthGrid {
  double radius = 5.0;  // |x|, |p| <= radius
  int points = 101;     // per axis
  int tau_points = 99;  // tau_k = k / (tau_points + 1)
  double tol = 1e-9;
};
struct DepthResult {
  double tau = 0.0;
  double half_width = 0.0;  // grid uncertainty
};
DepthResult nonclassicality_depth(const Mat& rho, const DepthGrid& grid = {});
double min_r_on_grid(const Mat& rho, double tau, const DepthGrid& grid);

// exp(alpha A^dagger - alpha* A) with A truncated to D_sub, so exactly unitary.
struct Displacement {
  Mat op;
  double defect = 0.0;  // weight of |alpha> above the cutoff
  bool warning = false; // defect above 1e-6
};
Displacement displacement(int dsub, cplx alpha);

// eta~_k = eta_k (1 - T_k + T_{K+1} delta_{k,K+1}) prod_{j<k} T_j, k = 1..K+1.
std::vector<double> tmd_port_efficiencies(const std::vector<double>& transmissions, const std::vector<double>& eta);
// Click-pattern probability for n photons; pattern bit k = port k clicked.
double tmd_click_probability(const std::vector<double>& port_eff, unsigned pattern, int n);
// 2^ports outcomes per displacement; displaced sets are scaled by 1/count.
// An empty displacement list gives the undisplaced (diagonal) POM.
Pom tmd_pom(int dsub, const std::vector<double>& port_eff, const std::vector<cplx>& displacements = {},
            int padding = 60);

Mat fock_state(int n, int dsub);
Mat coherent_state(cplx alpha, int dsub);
Mat laser_state(double mu, int dsub);
Mat cat_state(cplx alpha, int dsub);
// "laser", "cat", "fock", "coherent", "vacuum" with one real parameter.
// "coherent_mix" is the equal mixture of |a> and |-0.8 i a>.
Mat reference_state(const std::string& kind, double param, int dsub);

// One-dimensional Shack-Hartmann model.
struct ShConfig {
  int grid = 512;
  double half_width = 6.0;
  int apertures = 7;
  double aperture_width = 0.6;
  int pixels_per_aperture = 5;
  double pixel_spacing = 0.12;
  double zeta = 25.0;  // wave number
  double z = 1.0;      // propagation distance
};
// Modes x^l e^{-x^2} e^{i l x} Gram-Schmidt orthonormalized on the grid;
// columns are modes, rows are grid points.
Mat sh_default_modes(int dsub, const ShConfig& cfg);
Pom sh_pom(const Mat& modes, const ShConfig& cfg);
Pom sh_pom(int dsub, const ShConfig& cfg = {});

}  // namespace tomo
