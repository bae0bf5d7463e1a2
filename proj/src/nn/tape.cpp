#include "amoe/nn/tape.hpp"

#include <algorithm>
#include <cmath>

#include "amoe/common.hpp"

namespace amoe::nn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw InvariantError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

void check_rank2(const Tensor& a, const char* what) {
  if (a.shape.size() != 2) {
    throw InvariantError(std::string(what) + ": expected rank-2 tensor, got " + a.shape_str());
  }
}

}  // namespace

Tape::Var Tape::make(Tensor value, bool requires_grad, std::function<void(Tape&)> back,
                     const char* what) {
  value.check_finite(what);
  Node n;
  n.value = std::move(value);
  n.grad.shape = n.value.shape;
  n.grad.data.assign(n.value.numel(), 0.0);
  n.back = std::move(back);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::constant(Tensor t) { return make(std::move(t), false, nullptr, "constant"); }

Tape::Var Tape::param(Parameter& p) {
  Var out = make(p.value, true, nullptr, p.name.c_str());
  nodes_[out.id].leaf = &p;
  return out;
}

// ---------------------------------------------------------------- elementwise

Tape::Var Tape::add(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "add");
  Tensor out = v(a.id);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += v(b.id).data[i];
  const std::size_t ia = a.id, ib = b.id;
  Var o = make(std::move(out), rg(a) || rg(b), nullptr, "add");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    const Tensor& go = t.g(io);
    if (t.nodes_[ia].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ia).data[i] += go.data[i];
    }
    if (t.nodes_[ib].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ib).data[i] += go.data[i];
    }
  };
  return o;
}

Tape::Var Tape::sub(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "sub");
  Tensor out = v(a.id);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= v(b.id).data[i];
  const std::size_t ia = a.id, ib = b.id;
  Var o = make(std::move(out), rg(a) || rg(b), nullptr, "sub");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    const Tensor& go = t.g(io);
    if (t.nodes_[ia].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ia).data[i] += go.data[i];
    }
    if (t.nodes_[ib].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ib).data[i] -= go.data[i];
    }
  };
  return o;
}

Tape::Var Tape::mul(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "mul");
  Tensor out = v(a.id);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= v(b.id).data[i];
  const std::size_t ia = a.id, ib = b.id;
  Var o = make(std::move(out), rg(a) || rg(b), nullptr, "mul");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    const Tensor& go = t.g(io);
    if (t.nodes_[ia].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) {
        t.g(ia).data[i] += go.data[i] * t.v(ib).data[i];
      }
    }
    if (t.nodes_[ib].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) {
        t.g(ib).data[i] += go.data[i] * t.v(ia).data[i];
      }
    }
  };
  return o;
}

Tape::Var Tape::div(Var a, Var b) {
  check_same_shape(v(a.id), v(b.id), "div");
  Tensor out = v(a.id);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] /= v(b.id).data[i];
  const std::size_t ia = a.id, ib = b.id;
  Var o = make(std::move(out), rg(a) || rg(b), nullptr, "div");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, ib, io](Tape& t) {
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double bi = t.v(ib).data[i];
      if (t.nodes_[ia].requires_grad) t.g(ia).data[i] += go.data[i] / bi;
      if (t.nodes_[ib].requires_grad) {
        t.g(ib).data[i] -= go.data[i] * t.v(ia).data[i] / (bi * bi);
      }
    }
  };
  return o;
}

Tape::Var Tape::scalar_mul(Var a, double c) {
  Tensor out = v(a.id);
  for (double& x : out.data) x *= c;
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "scalar_mul");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io, c](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ia).data[i] += c * go.data[i];
  };
  return o;
}

Tape::Var Tape::add_scalar(Var a, double c) {
  Tensor out = v(a.id);
  for (double& x : out.data) x += c;
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "add_scalar");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ia).data[i] += go.data[i];
  };
  return o;
}

Tape::Var Tape::relu(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) x = x > 0 ? x : 0.0;
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "relu");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      if (t.v(ia).data[i] > 0) t.g(ia).data[i] += go.data[i];
    }
  };
  return o;
}

Tape::Var Tape::sigmoid(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "sigmoid");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double s = t.v(io).data[i];
      t.g(ia).data[i] += go.data[i] * s * (1.0 - s);
    }
  };
  return o;
}

Tape::Var Tape::softplus(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) {
    x = x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "softplus");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double x = t.v(ia).data[i];
      t.g(ia).data[i] += go.data[i] / (1.0 + std::exp(-x));
    }
  };
  return o;
}

Tape::Var Tape::log_op(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) {
    if (!(x > 0)) throw InvariantError("log: non-positive input");
    x = std::log(x);
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "log");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      t.g(ia).data[i] += go.data[i] / t.v(ia).data[i];
    }
  };
  return o;
}

Tape::Var Tape::abs_op(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) x = std::fabs(x);
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "abs");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double x = t.v(ia).data[i];
      if (x > 0) {
        t.g(ia).data[i] += go.data[i];
      } else if (x < 0) {
        t.g(ia).data[i] -= go.data[i];
      }
    }
  };
  return o;
}

Tape::Var Tape::sqrt_op(Var a) {
  Tensor out = v(a.id);
  for (double& x : out.data) {
    if (x < 0) throw InvariantError("sqrt: negative input");
    x = std::sqrt(x);
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "sqrt");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < go.data.size(); ++i) {
      const double s = t.v(io).data[i];
      if (s > 0) t.g(ia).data[i] += go.data[i] * 0.5 / s;
    }
  };
  return o;
}

// ------------------------------------------------------------- linear algebra

Tape::Var Tape::matmul(Var a, Var b) {
  check_rank2(v(a.id), "matmul");
  check_rank2(v(b.id), "matmul");
  const Tensor& A = v(a.id);
  const Tensor& B = v(b.id);
  if (A.shape[1] != B.shape[0]) {
    throw InvariantError("matmul: inner dims disagree " + A.shape_str() + " vs " + B.shape_str());
  }
  const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = A.data[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = &B.data[kk * n];
      double* orow = &out.data[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  const std::size_t ia = a.id, ib = b.id;
  Var o = make(std::move(out), rg(a) || rg(b), nullptr, "matmul");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, ib, io, m, k, n](Tape& t) {
    const Tensor& go = t.g(io);
    const Tensor& A_ = t.v(ia);
    const Tensor& B_ = t.v(ib);
    if (t.nodes_[ia].requires_grad) {
      // dA = dC * B^T
      Tensor& ga = t.g(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go.data[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t kk = 0; kk < k; ++kk) {
            ga.data[i * k + kk] += gij * B_.data[kk * n + j];
          }
        }
      }
    }
    if (t.nodes_[ib].requires_grad) {
      // dB = A^T * dC
      Tensor& gb = t.g(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double aik = A_.data[i * k + kk];
          if (aik == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) {
            gb.data[kk * n + j] += aik * go.data[i * n + j];
          }
        }
      }
    }
  };
  return o;
}

Tape::Var Tape::transpose(Var a) {
  check_rank2(v(a.id), "transpose");
  const Tensor& A = v(a.id);
  const std::size_t m = A.shape[0], n = A.shape[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = A.data[i * n + j];
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "transpose");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io, m, n](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        t.g(ia).data[i * n + j] += go.data[j * m + i];
      }
    }
  };
  return o;
}

Tape::Var Tape::add_rowvec(Var x, Var b) {
  check_rank2(v(x.id), "add_rowvec");
  const Tensor& X = v(x.id);
  const Tensor& B = v(b.id);
  const std::size_t m = X.shape[0], n = X.shape[1];
  if (B.numel() != n) throw InvariantError("add_rowvec: bias length mismatch");
  Tensor out = X;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] += B.data[j];
  }
  const std::size_t ix = x.id, ib = b.id;
  Var o = make(std::move(out), rg(x) || rg(b), nullptr, "add_rowvec");
  const std::size_t io = o.id;
  nodes_[io].back = [ix, ib, io, m, n](Tape& t) {
    const Tensor& go = t.g(io);
    if (t.nodes_[ix].requires_grad) {
      for (std::size_t i = 0; i < go.data.size(); ++i) t.g(ix).data[i] += go.data[i];
    }
    if (t.nodes_[ib].requires_grad) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) t.g(ib).data[j] += go.data[i * n + j];
      }
    }
  };
  return o;
}

Tape::Var Tape::mul_rowvec(Var x, Var v) {
  check_rank2(this->v(x.id), "mul_rowvec");
  const Tensor& X = this->v(x.id);
  const Tensor& V = this->v(v.id);
  const std::size_t m = X.shape[0], n = X.shape[1];
  if (V.numel() != n) throw InvariantError("mul_rowvec: vector length mismatch");
  Tensor out = X;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= V.data[j];
  }
  const std::size_t ix = x.id, iv = v.id;
  Var o = make(std::move(out), rg(x) || rg(v), nullptr, "mul_rowvec");
  const std::size_t io = o.id;
  nodes_[io].back = [ix, iv, io, m, n](Tape& t) {
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double gij = go.data[i * n + j];
        if (t.nodes_[ix].requires_grad) t.g(ix).data[i * n + j] += gij * t.v(iv).data[j];
        if (t.nodes_[iv].requires_grad) t.g(iv).data[j] += gij * t.v(ix).data[i * n + j];
      }
    }
  };
  return o;
}

Tape::Var Tape::scale_rows(Var x, Var s) {
  check_rank2(v(x.id), "scale_rows");
  const Tensor& X = v(x.id);
  const Tensor& S = v(s.id);
  const std::size_t m = X.shape[0], n = X.shape[1];
  if (S.numel() != m) throw InvariantError("scale_rows: scale length mismatch");
  Tensor out = X;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] *= S.data[i];
  }
  const std::size_t ix = x.id, is = s.id;
  Var o = make(std::move(out), rg(x) || rg(s), nullptr, "scale_rows");
  const std::size_t io = o.id;
  nodes_[io].back = [ix, is, io, m, n](Tape& t) {
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double gij = go.data[i * n + j];
        if (t.nodes_[ix].requires_grad) t.g(ix).data[i * n + j] += gij * t.v(is).data[i];
        if (t.nodes_[is].requires_grad) t.g(is).data[i] += gij * t.v(ix).data[i * n + j];
      }
    }
  };
  return o;
}

Tape::Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
  check_rank2(v(a.id), "slice_cols");
  const Tensor& A = v(a.id);
  const std::size_t m = A.shape[0], n = A.shape[1];
  if (!(c0 < c1 && c1 <= n)) throw InvariantError("slice_cols: bad range");
  Tensor out({m, c1 - c0});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = c0; j < c1; ++j) out.data[i * (c1 - c0) + (j - c0)] = A.data[i * n + j];
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "slice_cols");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io, m, n, c0, c1](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = c0; j < c1; ++j) {
        t.g(ia).data[i * n + j] += go.data[i * (c1 - c0) + (j - c0)];
      }
    }
  };
  return o;
}

Tape::Var Tape::concat_cols(const std::vector<Var>& vs) {
  if (vs.empty()) throw InvariantError("concat_cols: empty input");
  const std::size_t m = v(vs[0].id).shape[0];
  std::size_t total = 0;
  bool any_rg = false;
  for (Var x : vs) {
    check_rank2(v(x.id), "concat_cols");
    if (v(x.id).shape[0] != m) throw InvariantError("concat_cols: row mismatch");
    total += v(x.id).shape[1];
    any_rg = any_rg || rg(x);
  }
  Tensor out({m, total});
  std::size_t off = 0;
  for (Var x : vs) {
    const Tensor& X = v(x.id);
    const std::size_t n = X.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) out.data[i * total + off + j] = X.data[i * n + j];
    }
    off += n;
  }
  std::vector<std::size_t> ids;
  ids.reserve(vs.size());
  for (Var x : vs) ids.push_back(x.id);
  Var o = make(std::move(out), any_rg, nullptr, "concat_cols");
  const std::size_t io = o.id;
  nodes_[io].back = [ids, io, m, total](Tape& t) {
    const Tensor& go = t.g(io);
    std::size_t off_ = 0;
    for (std::size_t id : ids) {
      const std::size_t n = t.v(id).shape[1];
      if (t.nodes_[id].requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            t.g(id).data[i * n + j] += go.data[i * total + off_ + j];
          }
        }
      }
      off_ += n;
    }
  };
  return o;
}

Tape::Var Tape::concat_rows(const std::vector<Var>& vs) {
  if (vs.empty()) throw InvariantError("concat_rows: empty input");
  const std::size_t n = v(vs[0].id).shape[1];
  std::size_t total = 0;
  bool any_rg = false;
  for (Var x : vs) {
    check_rank2(v(x.id), "concat_rows");
    if (v(x.id).shape[1] != n) throw InvariantError("concat_rows: col mismatch");
    total += v(x.id).shape[0];
    any_rg = any_rg || rg(x);
  }
  Tensor out({total, n});
  std::size_t off = 0;
  for (Var x : vs) {
    const Tensor& X = v(x.id);
    std::copy(X.data.begin(), X.data.end(), out.data.begin() + off * n);
    off += X.shape[0];
  }
  std::vector<std::size_t> ids;
  ids.reserve(vs.size());
  for (Var x : vs) ids.push_back(x.id);
  Var o = make(std::move(out), any_rg, nullptr, "concat_rows");
  const std::size_t io = o.id;
  nodes_[io].back = [ids, io, n](Tape& t) {
    const Tensor& go = t.g(io);
    std::size_t off_ = 0;
    for (std::size_t id : ids) {
      const std::size_t rows = t.v(id).shape[0];
      if (t.nodes_[id].requires_grad) {
        for (std::size_t i = 0; i < rows * n; ++i) {
          t.g(id).data[i] += go.data[off_ * n + i];
        }
      }
      off_ += rows;
    }
  };
  return o;
}

// ------------------------------------------------------------------ row ops

Tape::Var Tape::row_sum(Var a) {
  check_rank2(v(a.id), "row_sum");
  const Tensor& A = v(a.id);
  const std::size_t m = A.shape[0], n = A.shape[1];
  Tensor out({m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += A.data[i * n + j];
    out.data[i] = s;
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "row_sum");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io, m, n](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) t.g(ia).data[i * n + j] += go.data[i];
    }
  };
  return o;
}

Tape::Var Tape::row_softmax(Var a) {
  check_rank2(v(a.id), "row_softmax");
  const Tensor& A = v(a.id);
  const std::size_t m = A.shape[0], n = A.shape[1];
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double mx = A.data[i * n];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, A.data[i * n + j]);
    double denom = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(A.data[i * n + j] - mx);
      out.data[i * n + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] /= denom;
  }
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "row_softmax");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io, m, n](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const Tensor& go = t.g(io);
    const Tensor& s = t.v(io);
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += go.data[i * n + j] * s.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        t.g(ia).data[i * n + j] += s.data[i * n + j] * (go.data[i * n + j] - dot);
      }
    }
  };
  return o;
}

Tape::Var Tape::sum(Var a) {
  const Tensor& A = v(a.id);
  Tensor out({1});
  for (double x : A.data) out.data[0] += x;
  const std::size_t ia = a.id;
  Var o = make(std::move(out), rg(a), nullptr, "sum");
  const std::size_t io = o.id;
  nodes_[io].back = [ia, io](Tape& t) {
    if (!t.nodes_[ia].requires_grad) return;
    const double go = t.g(io).data[0];
    for (double& gx : t.g(ia).data) gx += go;
  };
  return o;
}

Tape::Var Tape::mean(Var a) {
  const std::size_t n = v(a.id).numel();
  return scalar_mul(sum(a), 1.0 / static_cast<double>(n));
}

Tape::Var Tape::layer_norm(Var x, Var gain, Var bias, double eps) {
  check_rank2(v(x.id), "layer_norm");
  const Tensor& X = v(x.id);
  const Tensor& G = v(gain.id);
  const Tensor& B = v(bias.id);
  const std::size_t m = X.shape[0], n = X.shape[1];
  if (G.numel() != n || B.numel() != n) throw InvariantError("layer_norm: gain/bias length");

  Tensor out({m, n});
  Tensor xhat({m, n});
  std::vector<double> inv_std(m);
  std::vector<double> mu(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += X.data[i * n + j];
    mu[i] = s / static_cast<double>(n);
    double var = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = X.data[i * n + j] - mu[i];
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (X.data[i * n + j] - mu[i]) * inv_std[i];
      xhat.data[i * n + j] = xh;
      out.data[i * n + j] = G.data[j] * xh + B.data[j];
    }
  }
  const std::size_t ix = x.id, ig = gain.id, ib = bias.id;
  Var o = make(std::move(out), rg(x) || rg(gain) || rg(bias), nullptr, "layer_norm");
  const std::size_t io = o.id;
  nodes_[io].back = [ix, ig, ib, io, m, n, xhat, inv_std](Tape& t) {
    const Tensor& go = t.g(io);
    const Tensor& G_ = t.v(ig);
    for (std::size_t i = 0; i < m; ++i) {
      if (t.nodes_[ig].requires_grad || t.nodes_[ib].requires_grad) {
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = go.data[i * n + j];
          if (t.nodes_[ig].requires_grad) t.g(ig).data[j] += gij * xhat.data[i * n + j];
          if (t.nodes_[ib].requires_grad) t.g(ib).data[j] += gij;
        }
      }
      if (t.nodes_[ix].requires_grad) {
        // dxhat = go * g; dx = inv_std * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
        double mean_dxhat = 0, mean_dxhat_xhat = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = go.data[i * n + j] * G_.data[j];
          mean_dxhat += dxh;
          mean_dxhat_xhat += dxh * xhat.data[i * n + j];
        }
        mean_dxhat /= static_cast<double>(n);
        mean_dxhat_xhat /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          const double dxh = go.data[i * n + j] * G_.data[j];
          t.g(ix).data[i * n + j] +=
              inv_std[i] * (dxh - mean_dxhat - xhat.data[i * n + j] * mean_dxhat_xhat);
        }
      }
    }
  };
  return o;
}

Tape::Var Tape::bce_with_probs(Var p, const Tensor& targets, double label_smoothing) {
  const Tensor& P = v(p.id);
  if (P.numel() != targets.numel()) throw InvariantError("bce: size mismatch");
  if (!(label_smoothing >= 0 && label_smoothing < 0.5)) {
    throw InvariantError("bce: label_smoothing in [0, 0.5)");
  }
  constexpr double kEps = 1e-7;
  const std::size_t n = P.numel();
  Tensor out({1});
  std::vector<double> t_smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = targets.data[i];
    t_smooth[i] = y * (1.0 - label_smoothing) + label_smoothing / 2.0;
    const double pc = std::clamp(P.data[i], kEps, 1.0 - kEps);
    out.data[0] -= t_smooth[i] * std::log(pc) + (1.0 - t_smooth[i]) * std::log(1.0 - pc);
  }
  out.data[0] /= static_cast<double>(n);
  const std::size_t ip = p.id;
  Var o = make(std::move(out), rg(p), nullptr, "bce");
  const std::size_t io = o.id;
  nodes_[io].back = [ip, io, t_smooth, n](Tape& t) {
    if (!t.nodes_[ip].requires_grad) return;
    const double go = t.g(io).data[0];
    for (std::size_t i = 0; i < n; ++i) {
      const double praw = t.v(ip).data[i];
      if (praw <= 1e-7 || praw >= 1.0 - 1e-7) continue;  // clamped: zero gradient
      t.g(ip).data[i] += go * (praw - t_smooth[i]) / (praw * (1.0 - praw) * static_cast<double>(n));
    }
  };
  return o;
}

void Tape::backward(Var loss) {
  if (v(loss.id).numel() != 1) throw InvariantError("backward: loss must be scalar");
  for (auto& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
  nodes_[loss.id].grad.data[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.back) n.back(*this);
    if (n.leaf) {
      for (std::size_t k = 0; k < n.grad.data.size(); ++k) {
        n.leaf->grad.data[k] += n.grad.data[k];
      }
    }
  }
}

}  // namespace amoe::nn
