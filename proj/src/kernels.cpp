#include "mlap/kernels.hpp"

#include <atomic>

namespace mlap::kernels {

namespace {
std::atomic<int> g_threads{1};
}

void set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }
int threads() { return g_threads.load(); }

namespace serial {

void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(mu_w.size() == I * O && s2_w.size() == I * O, "dense: weight shape");
  check_dim(mu_b.size() == O && s2_b.size() == O, "dense: bias shape");
  mean = Mat(B, O);
  var = Mat(B, O);
  for (std::size_t b = 0; b < B; ++b) {
    double* m = mean.row(b);
    double* v = var.row(b);
    for (std::size_t o = 0; o < O; ++o) {
      m[o] = mu_b[o];
      v[o] = s2_b[o];
    }
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double xi = xb[i], xi2 = xi * xi;
      const double* wrow = &mu_w[i * O];
      const double* srow = &s2_w[i * O];
      for (std::size_t o = 0; o < O; ++o) {
        m[o] += xi * wrow[o];
        v[o] += xi2 * srow[o];
      }
    }
  }
}

void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(mu_w.size() == I * O, "dense: weight shape");
  check_dim(mu_b.size() == O, "dense: bias shape");
  mean = Mat(B, O);
  for (std::size_t b = 0; b < B; ++b) {
    double* m = mean.row(b);
    for (std::size_t o = 0; o < O; ++o) m[o] = mu_b[o];
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double xi = xb[i];
      const double* wrow = &mu_w[i * O];
      for (std::size_t o = 0; o < O; ++o) m[o] += xi * wrow[o];
    }
  }
}

void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b) {
  const std::size_t B = x.rows, I = x.cols, O = dz.cols;
  check_dim(dz.rows == B && dv.rows == B && dv.cols == O, "dense grad: shape");
  check_dim(d_mu_w.size() == I * O && d_s2_w.size() == I * O, "dense grad: w shape");
  check_dim(d_mu_b.size() == O && d_s2_b.size() == O, "dense grad: b shape");
  for (std::size_t i = 0; i < I; ++i) {
    double* gw = &d_mu_w[i * O];
    double* gs = &d_s2_w[i * O];
    for (std::size_t o = 0; o < O; ++o) {
      double aw = 0.0, as = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double xi = x(b, i);
        aw += xi * dz(b, o);
        as += xi * xi * dv(b, o);
      }
      gw[o] += aw;
      gs[o] += as;
    }
  }
  for (std::size_t o = 0; o < O; ++o) {
    double ab = 0.0, av = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      ab += dz(b, o);
      av += dv(b, o);
    }
    d_mu_b[o] += ab;
    d_s2_b[o] += av;
  }
}

void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b) {
  const std::size_t B = x.rows, I = x.cols, O = dz.cols;
  check_dim(dz.rows == B, "dense grad: shape");
  check_dim(d_mu_w.size() == I * O && d_mu_b.size() == O, "dense grad: shape");
  for (std::size_t i = 0; i < I; ++i) {
    double* gw = &d_mu_w[i * O];
    for (std::size_t o = 0; o < O; ++o) {
      double aw = 0.0;
      for (std::size_t b = 0; b < B; ++b) aw += x(b, i) * dz(b, o);
      gw[o] += aw;
    }
  }
  for (std::size_t o = 0; o < O; ++o) {
    double ab = 0.0;
    for (std::size_t b = 0; b < B; ++b) ab += dz(b, o);
    d_mu_b[o] += ab;
  }
}

void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(dz.rows == B && dz.cols == O && dv.rows == B && dv.cols == O,
            "dense grad input: shape");
  dx = Mat(B, I);
  for (std::size_t b = 0; b < B; ++b) {
    double* g = dx.row(b);
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double* wrow = &mu_w[i * O];
      const double* srow = &s2_w[i * O];
      double am = 0.0, av = 0.0;
      for (std::size_t o = 0; o < O; ++o) {
        am += dz(b, o) * wrow[o];
        av += dv(b, o) * srow[o];
      }
      g[i] = am + 2.0 * xb[i] * av;
    }
  }
}

void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx) {
  const std::size_t B = dz.rows, O = dz.cols, I = fan_in;
  check_dim(mu_w.size() == I * O, "dense grad input: shape");
  dx = Mat(B, I);
  for (std::size_t b = 0; b < B; ++b) {
    double* g = dx.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double* wrow = &mu_w[i * O];
      double am = 0.0;
      for (std::size_t o = 0; o < O; ++o) am += dz(b, o) * wrow[o];
      g[i] = am;
    }
  }
}

}  // namespace serial

namespace par {

// Row b (or weight row i) is owned by exactly one thread and its inner loops
// run in the same order as the serial reference, so results match bitwise.

void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(mu_w.size() == I * O && s2_w.size() == I * O, "dense: weight shape");
  check_dim(mu_b.size() == O && s2_b.size() == O, "dense: bias shape");
  mean = Mat(B, O);
  var = Mat(B, O);
  const long long nB = static_cast<long long>(B);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long bb = 0; bb < nB; ++bb) {
    const std::size_t b = static_cast<std::size_t>(bb);
    double* m = mean.row(b);
    double* v = var.row(b);
    for (std::size_t o = 0; o < O; ++o) {
      m[o] = mu_b[o];
      v[o] = s2_b[o];
    }
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double xi = xb[i], xi2 = xi * xi;
      const double* wrow = &mu_w[i * O];
      const double* srow = &s2_w[i * O];
      for (std::size_t o = 0; o < O; ++o) {
        m[o] += xi * wrow[o];
        v[o] += xi2 * srow[o];
      }
    }
  }
}

void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(mu_w.size() == I * O, "dense: weight shape");
  check_dim(mu_b.size() == O, "dense: bias shape");
  mean = Mat(B, O);
  const long long nB = static_cast<long long>(B);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long bb = 0; bb < nB; ++bb) {
    const std::size_t b = static_cast<std::size_t>(bb);
    double* m = mean.row(b);
    for (std::size_t o = 0; o < O; ++o) m[o] = mu_b[o];
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double xi = xb[i];
      const double* wrow = &mu_w[i * O];
      for (std::size_t o = 0; o < O; ++o) m[o] += xi * wrow[o];
    }
  }
}

void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b) {
  const std::size_t B = x.rows, I = x.cols, O = dz.cols;
  check_dim(dz.rows == B && dv.rows == B && dv.cols == O, "dense grad: shape");
  check_dim(d_mu_w.size() == I * O && d_s2_w.size() == I * O, "dense grad: w shape");
  check_dim(d_mu_b.size() == O && d_s2_b.size() == O, "dense grad: b shape");
  const long long nI = static_cast<long long>(I);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long ii = 0; ii < nI; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    double* gw = &d_mu_w[i * O];
    double* gs = &d_s2_w[i * O];
    for (std::size_t o = 0; o < O; ++o) {
      double aw = 0.0, as = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double xi = x(b, i);
        aw += xi * dz(b, o);
        as += xi * xi * dv(b, o);
      }
      gw[o] += aw;
      gs[o] += as;
    }
  }
  const long long nO = static_cast<long long>(O);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long oo = 0; oo < nO; ++oo) {
    const std::size_t o = static_cast<std::size_t>(oo);
    double ab = 0.0, av = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
      ab += dz(b, o);
      av += dv(b, o);
    }
    d_mu_b[o] += ab;
    d_s2_b[o] += av;
  }
}

void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b) {
  const std::size_t B = x.rows, I = x.cols, O = dz.cols;
  check_dim(dz.rows == B, "dense grad: shape");
  check_dim(d_mu_w.size() == I * O && d_mu_b.size() == O, "dense grad: shape");
  const long long nI = static_cast<long long>(I);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long ii = 0; ii < nI; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    double* gw = &d_mu_w[i * O];
    for (std::size_t o = 0; o < O; ++o) {
      double aw = 0.0;
      for (std::size_t b = 0; b < B; ++b) aw += x(b, i) * dz(b, o);
      gw[o] += aw;
    }
  }
  const long long nO = static_cast<long long>(O);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long oo = 0; oo < nO; ++oo) {
    const std::size_t o = static_cast<std::size_t>(oo);
    double ab = 0.0;
    for (std::size_t b = 0; b < B; ++b) ab += dz(b, o);
    d_mu_b[o] += ab;
  }
}

void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx) {
  const std::size_t B = x.rows, I = x.cols, O = fan_out;
  check_dim(dz.rows == B && dz.cols == O && dv.rows == B && dv.cols == O,
            "dense grad input: shape");
  dx = Mat(B, I);
  const long long nB = static_cast<long long>(B);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long bb = 0; bb < nB; ++bb) {
    const std::size_t b = static_cast<std::size_t>(bb);
    double* g = dx.row(b);
    const double* xb = x.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double* wrow = &mu_w[i * O];
      const double* srow = &s2_w[i * O];
      double am = 0.0, av = 0.0;
      for (std::size_t o = 0; o < O; ++o) {
        am += dz(b, o) * wrow[o];
        av += dv(b, o) * srow[o];
      }
      g[i] = am + 2.0 * xb[i] * av;
    }
  }
}

void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx) {
  const std::size_t B = dz.rows, O = dz.cols, I = fan_in;
  check_dim(mu_w.size() == I * O, "dense grad input: shape");
  dx = Mat(B, I);
  const long long nB = static_cast<long long>(B);
#pragma omp parallel for num_threads(threads()) schedule(static)
  for (long long bb = 0; bb < nB; ++bb) {
    const std::size_t b = static_cast<std::size_t>(bb);
    double* g = dx.row(b);
    for (std::size_t i = 0; i < I; ++i) {
      const double* wrow = &mu_w[i * O];
      double am = 0.0;
      for (std::size_t o = 0; o < O; ++o) am += dz(b, o) * wrow[o];
      g[i] = am;
    }
  }
}

}  // namespace par

void dense_mean_var(const Mat& x, const Vec& mu_w, const Vec& s2_w, const Vec& mu_b,
                    const Vec& s2_b, std::size_t fan_out, Mat& mean, Mat& var) {
  if (threads() > 1)
    par::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, fan_out, mean, var);
  else
    serial::dense_mean_var(x, mu_w, s2_w, mu_b, s2_b, fan_out, mean, var);
}

void dense_mean(const Mat& x, const Vec& mu_w, const Vec& mu_b, std::size_t fan_out,
                Mat& mean) {
  if (threads() > 1)
    par::dense_mean(x, mu_w, mu_b, fan_out, mean);
  else
    serial::dense_mean(x, mu_w, mu_b, fan_out, mean);
}

void dense_grad_params(const Mat& x, const Mat& dz, const Mat& dv, Vec& d_mu_w,
                       Vec& d_s2_w, Vec& d_mu_b, Vec& d_s2_b) {
  if (threads() > 1)
    par::dense_grad_params(x, dz, dv, d_mu_w, d_s2_w, d_mu_b, d_s2_b);
  else
    serial::dense_grad_params(x, dz, dv, d_mu_w, d_s2_w, d_mu_b, d_s2_b);
}

void dense_grad_params_mean(const Mat& x, const Mat& dz, Vec& d_mu_w, Vec& d_mu_b) {
  if (threads() > 1)
    par::dense_grad_params_mean(x, dz, d_mu_w, d_mu_b);
  else
    serial::dense_grad_params_mean(x, dz, d_mu_w, d_mu_b);
}

void dense_grad_input(const Mat& x, const Mat& dz, const Mat& dv, const Vec& mu_w,
                      const Vec& s2_w, std::size_t fan_out, Mat& dx) {
  if (threads() > 1)
    par::dense_grad_input(x, dz, dv, mu_w, s2_w, fan_out, dx);
  else
    serial::dense_grad_input(x, dz, dv, mu_w, s2_w, fan_out, dx);
}

void dense_grad_input_mean(const Mat& dz, const Vec& mu_w, std::size_t fan_in,
                           Mat& dx) {
  if (threads() > 1)
    par::dense_grad_input_mean(dz, mu_w, fan_in, dx);
  else
    serial::dense_grad_input_mean(dz, mu_w, fan_in, dx);
}

}  // namespace mlap::kernels
