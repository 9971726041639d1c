// Timing comparison of the serial reference kernels against the OpenMP
// variants, with a bitwise-equality check on every output buffer.
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include "mlap/kernels.hpp"
#include "mlap/rng.hpp"

using namespace mlap;

namespace {

double time_ms(int iters, const std::function<void()>& fn) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

bool bits_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t B = 256, I = 512, O = 256;
  int iters = 30;
  int threads = omp_get_max_threads();
  for (int a = 1; a + 1 < argc; a += 2) {
    const std::string k = argv[a];
    const long v = std::atol(argv[a + 1]);
    if (k == "--batch") B = v;
    else if (k == "--in") I = v;
    else if (k == "--out") O = v;
    else if (k == "--iters") iters = static_cast<int>(v);
    else if (k == "--threads") threads = static_cast<int>(v);
  }
  std::printf("dense kernels, batch=%zu fan_in=%zu fan_out=%zu, %d iters, "
              "%d thread(s)\n", B, I, O, iters, threads);

  auto eng = make_engine(7);
  Mat x(B, I), dz(B, O), dv(B, O);
  Vec mu_w(I * O), s2_w(I * O), mu_b(O), s2_b(O);
  fill_uniform(eng, x.data, -1.0, 1.0);
  fill_uniform(eng, dz.data, -1.0, 1.0);
  fill_uniform(eng, dv.data, -1.0, 1.0);
  fill_uniform(eng, mu_w, -0.5, 0.5);
  fill_uniform(eng, s2_w, 0.01, 0.2);
  fill_uniform(eng, mu_b, -0.5, 0.5);
  fill_uniform(eng, s2_b, 0.01, 0.2);

  bool all_equal = true;
  auto row = [&](const char* name, const Vec& serial_out, const Vec& par_out,
                 double ts, double tp) {
    const bool eq = bits_equal(serial_out, par_out);
    all_equal = all_equal && eq;
    std::printf("%-18s serial %8.3f ms   omp %8.3f ms   speedup %5.2fx   "
                "bitwise %s\n", name, ts, tp, ts / tp, eq ? "equal" : "DIFFER");
  };

  {
    Mat mean_s(B, O), var_s(B, O), mean_p(B, O), var_p(B, O);
    kernels::set_threads(1);
    const double ts = time_ms(iters, [&] {
      kernels::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, O, mean_s, var_s);
    });
    kernels::set_threads(threads);
    const double tp = time_ms(iters, [&] {
      kernels::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, O, mean_p, var_p);
    });
    row("dense_mean_var", mean_s.data, mean_p.data, ts, tp);
    all_equal = all_equal && bits_equal(var_s.data, var_p.data);
  }
  {
    Vec dmw_s(I * O), dsw_s(I * O), dmb_s(O), dsb_s(O);
    Vec dmw_p(I * O), dsw_p(I * O), dmb_p(O), dsb_p(O);
    kernels::set_threads(1);
    const double ts = time_ms(iters, [&] {
      std::fill(dmw_s.begin(), dmw_s.end(), 0.0);
      std::fill(dsw_s.begin(), dsw_s.end(), 0.0);
      std::fill(dmb_s.begin(), dmb_s.end(), 0.0);
      std::fill(dsb_s.begin(), dsb_s.end(), 0.0);
      kernels::dense_grad_params(x, dz, dv, dmw_s, dsw_s, dmb_s, dsb_s);
    });
    kernels::set_threads(threads);
    const double tp = time_ms(iters, [&] {
      std::fill(dmw_p.begin(), dmw_p.end(), 0.0);
      std::fill(dsw_p.begin(), dsw_p.end(), 0.0);
      std::fill(dmb_p.begin(), dmb_p.end(), 0.0);
      std::fill(dsb_p.begin(), dsb_p.end(), 0.0);
      kernels::dense_grad_params(x, dz, dv, dmw_p, dsw_p, dmb_p, dsb_p);
    });
    row("dense_grad_params", dmw_s, dmw_p, ts, tp);
    all_equal = all_equal && bits_equal(dsw_s, dsw_p) && bits_equal(dmb_s, dmb_p) &&
                bits_equal(dsb_s, dsb_p);
  }
  {
    Mat dx_s(B, I), dx_p(B, I);
    kernels::set_threads(1);
    const double ts = time_ms(iters, [&] {
      kernels::dense_grad_input(x, dz, dv, mu_w, s2_w, O, dx_s);
    });
    kernels::set_threads(threads);
    const double tp = time_ms(iters, [&] {
      kernels::dense_grad_input(x, dz, dv, mu_w, s2_w, O, dx_p);
    });
    row("dense_grad_input", dx_s.data, dx_p.data, ts, tp);
  }

  std::printf("all outputs bitwise identical: %s\n", all_equal ? "yes" : "NO");
  return all_equal ? 0 : 1;
}
