#pragma once

#include "mlap/mat.hpp"

namespace mlap::kernels {

/// Thread count used by the parallel kernel variants and the per-task loops.
/// 1 selects the serial reference path everywhere.
void set_threads(int n);
int threads();

// Dense layer kernels. Weights are row-major [fan_in][fan_out]; s2 denotes
// per-entry variances. The parallel variants partition work so that every
// output element is accumulated in the same order as the serial reference,
// which keeps the two paths bit-identical.

namespace serial {

// mean[b,o] = sum_i x[b,i]*mu_w[i,o] + mu_b[o]
// var [b,o] = sum_i x[b,i]^2*s2_w[i,o] + s2_b[o]
void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var);

void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean);

// d_mu_w[i,o] += sum_b x[b,i]*dz[b,o];  d_s2_w[i,o] += sum_b x[b,i]^2*dv[b,o]
// d_mu_b[o]   += sum_b dz[b,o];         d_s2_b[o]   += sum_b dv[b,o]
void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b);

void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b);

// dx[b,i] = sum_o dz[b,o]*mu_w[i,o] + 2*x[b,i]*sum_o dv[b,o]*s2_w[i,o]
void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx);

void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx);

}  // namespace serial

namespace par {

void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var);
void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean);
void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b);
void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b);
void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx);
void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx);

}  // namespace par

// Dispatchers: parallel variant when threads() > 1, serial reference otherwise.
void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var);
void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean);
void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b);
void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b);
void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx);
void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx);

}  // namespace mlap::kernels
