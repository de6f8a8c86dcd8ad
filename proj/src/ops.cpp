#include "stgc/ops.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stgc {

namespace {

std::string shape_str(const Matrix& m) {
  std::ostringstream os;
  os << "[" << m.rows() << " x " << m.cols() << "]";
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw std::invalid_argument(std::string(op) + ": " + detail);
}

Tape& tape_of(const char* op, Value v) {
  if (!v.valid()) shape_fail(op, "invalid value handle");
  return *v.tape;
}

void same_tape(const char* op, Value a, Value b) {
  if (a.tape != b.tape) shape_fail(op, "operands live on different tapes");
}

void same_shape(const char* op, Value a, Value b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    shape_fail(op, "shape mismatch " + shape_str(a.val()) + " vs " + shape_str(b.val()));
}

bool needs_grad(Value v) { return v.tape->node(v.id).requires_grad; }

}  // namespace

Value constant(Tape& tape, Matrix m) { return tape.record(std::move(m), false); }

Value scalar(Tape& tape, double x) {
  Matrix m(1, 1);
  m(0, 0) = x;
  return tape.record(std::move(m), false);
}

Value leaf(Tape& tape, Parameter& p) {
  tape.register_param(&p);
  Parameter* ptr = &p;
  return tape.record(p.value, true, [ptr](Tape&, const Matrix& g) { ptr->grad += g; });
}

Value matmul(Value a, Value b) {
  Tape& t = tape_of("matmul", a);
  same_tape("matmul", a, b);
  if (a.cols() != b.rows())
    shape_fail("matmul", "inner dimensions differ " + shape_str(a.val()) + " vs " + shape_str(b.val()));
  Matrix y = a.val() * b.val();
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g * t.node(ib).value.transpose());
    t.accumulate(ib, t.node(ia).value.transpose() * g);
  });
}

Value add(Value a, Value b) {
  Tape& t = tape_of("add", a);
  same_tape("add", a, b);
  same_shape("add", a, b);
  Matrix y = a.val() + b.val();
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Value sub(Value a, Value b) {
  Tape& t = tape_of("sub", a);
  same_tape("sub", a, b);
  same_shape("sub", a, b);
  Matrix y = a.val() - b.val();
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, -g);
  });
}

Value cwise_mul(Value a, Value b) {
  Tape& t = tape_of("cwise_mul", a);
  same_tape("cwise_mul", a, b);
  same_shape("cwise_mul", a, b);
  Matrix y = a.val().cwiseProduct(b.val());
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseProduct(t.node(ib).value));
    t.accumulate(ib, g.cwiseProduct(t.node(ia).value));
  });
}

Value cwise_div(Value a, Value b) {
  Tape& t = tape_of("cwise_div", a);
  same_tape("cwise_div", a, b);
  same_shape("cwise_div", a, b);
  Matrix y = a.val().cwiseQuotient(b.val());
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& bv = t.node(ib).value;
    t.accumulate(ia, g.cwiseQuotient(bv));
    t.accumulate(ib, -g.cwiseProduct(t.node(ia).value).cwiseQuotient(bv.cwiseProduct(bv)));
  });
}

Value scale(Value a, double c) {
  Tape& t = tape_of("scale", a);
  Matrix y = c * a.val();
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a),
                  [ia, c](Tape& t, const Matrix& g) { t.accumulate(ia, c * g); });
}

Value transpose(Value a) {
  Tape& t = tape_of("transpose", a);
  Matrix y = a.val().transpose();
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a),
                  [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g.transpose()); });
}

Value vcat(std::span<const Value> parts) {
  if (parts.empty()) shape_fail("vcat", "no inputs");
  Tape& t = tape_of("vcat", parts[0]);
  Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (Value p : parts) {
    same_tape("vcat", parts[0], p);
    if (p.cols() != cols)
      shape_fail("vcat", "column count mismatch " + shape_str(parts[0].val()) + " vs " + shape_str(p.val()));
    rows += p.rows();
    rg = rg || needs_grad(p);
  }
  Matrix y(rows, cols);
  std::vector<std::int32_t> ids;
  std::vector<Eigen::Index> offsets, sizes;
  Eigen::Index at = 0;
  for (Value p : parts) {
    y.middleRows(at, p.rows()) = p.val();
    ids.push_back(p.id);
    offsets.push_back(at);
    sizes.push_back(p.rows());
    at += p.rows();
  }
  return t.record(std::move(y), rg,
                  [ids = std::move(ids), offsets = std::move(offsets),
                   sizes = std::move(sizes)](Tape& t, const Matrix& g) {
                    for (std::size_t i = 0; i < ids.size(); ++i)
                      t.accumulate(ids[i], g.middleRows(offsets[i], sizes[i]));
                  });
}

Value hcat(std::span<const Value> parts) {
  if (parts.empty()) shape_fail("hcat", "no inputs");
  Tape& t = tape_of("hcat", parts[0]);
  Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Value p : parts) {
    same_tape("hcat", parts[0], p);
    if (p.rows() != rows)
      shape_fail("hcat", "row count mismatch " + shape_str(parts[0].val()) + " vs " + shape_str(p.val()));
    cols += p.cols();
    rg = rg || needs_grad(p);
  }
  Matrix y(rows, cols);
  std::vector<std::int32_t> ids;
  std::vector<Eigen::Index> offsets, sizes;
  Eigen::Index at = 0;
  for (Value p : parts) {
    y.middleCols(at, p.cols()) = p.val();
    ids.push_back(p.id);
    offsets.push_back(at);
    sizes.push_back(p.cols());
    at += p.cols();
  }
  return t.record(std::move(y), rg,
                  [ids = std::move(ids), offsets = std::move(offsets),
                   sizes = std::move(sizes)](Tape& t, const Matrix& g) {
                    for (std::size_t i = 0; i < ids.size(); ++i)
                      t.accumulate(ids[i], g.middleCols(offsets[i], sizes[i]));
                  });
}

Value dot(Value a, Value b) {
  Tape& t = tape_of("dot", a);
  same_tape("dot", a, b);
  if (a.cols() != 1 || b.cols() != 1 || a.rows() != b.rows())
    shape_fail("dot", "expected equal-length column vectors, got " + shape_str(a.val()) + " and " +
                          shape_str(b.val()));
  Matrix y(1, 1);
  y(0, 0) = a.val().col(0).dot(b.val().col(0));
  bool rg = needs_grad(a) || needs_grad(b);
  auto ia = a.id, ib = b.id;
  return t.record(std::move(y), rg, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g(0, 0) * t.node(ib).value);
    t.accumulate(ib, g(0, 0) * t.node(ia).value);
  });
}

Value sum(Value a) {
  Tape& t = tape_of("sum", a);
  Matrix y(1, 1);
  y(0, 0) = a.val().sum();
  auto ia = a.id;
  Eigen::Index r = a.rows(), c = a.cols();
  return t.record(std::move(y), needs_grad(a), [ia, r, c](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0)));
  });
}

Value mean(Value a) {
  Tape& t = tape_of("mean", a);
  if (a.val().size() == 0) shape_fail("mean", "empty input");
  Matrix y(1, 1);
  y(0, 0) = a.val().mean();
  auto ia = a.id;
  Eigen::Index r = a.rows(), c = a.cols();
  double inv_n = 1.0 / static_cast<double>(r * c);
  return t.record(std::move(y), needs_grad(a), [ia, r, c, inv_n](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(r, c, g(0, 0) * inv_n));
  });
}

Value l2_norm(Value a) {
  Tape& t = tape_of("l2_norm", a);
  Matrix y(1, 1);
  y(0, 0) = a.val().norm();
  auto ia = a.id;
  double norm = y(0, 0);
  return t.record(std::move(y), needs_grad(a), [ia, norm](Tape& t, const Matrix& g) {
    t.accumulate(ia, (g(0, 0) / norm) * t.node(ia).value);
  });
}

Value leaky_relu(Value a, double negative_slope) {
  Tape& t = tape_of("leaky_relu", a);
  t.note_kink(a.val().cwiseAbs().minCoeff());
  Matrix y = a.val().unaryExpr([negative_slope](double x) { return x >= 0.0 ? x : negative_slope * x; });
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a), [ia, negative_slope](Tape& t, const Matrix& g) {
    const Matrix& x = t.node(ia).value;
    t.accumulate(ia, g.binaryExpr(x, [negative_slope](double gi, double xi) {
      return xi >= 0.0 ? gi : negative_slope * gi;
    }));
  });
}

Value relu(Value a) {
  Tape& t = tape_of("relu", a);
  t.note_kink(a.val().cwiseAbs().minCoeff());
  Matrix y = a.val().cwiseMax(0.0);
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a), [ia](Tape& t, const Matrix& g) {
    const Matrix& x = t.node(ia).value;
    t.accumulate(ia, g.binaryExpr(x, [](double gi, double xi) { return xi >= 0.0 ? gi : 0.0; }));
  });
}

Value clamp_min(Value a, double floor) {
  Tape& t = tape_of("clamp_min", a);
  t.note_kink((a.val().array() - floor).abs().minCoeff());
  Matrix y = a.val().cwiseMax(floor);
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a), [ia, floor](Tape& t, const Matrix& g) {
    const Matrix& x = t.node(ia).value;
    t.accumulate(ia, g.binaryExpr(x, [floor](double gi, double xi) { return xi >= floor ? gi : 0.0; }));
  });
}

Value sigmoid(Value a) {
  Tape& t = tape_of("sigmoid", a);
  Matrix y = a.val().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
  auto ia = a.id;
  auto iy = t.record(std::move(y), needs_grad(a), {});
  // gradient uses the output value: s(1-s)
  if (needs_grad(a)) {
    auto out_id = iy.id;
    t.node(out_id).backward = [ia, out_id](Tape& t, const Matrix& g) {
      const Matrix& s = t.node(out_id).value;
      t.accumulate(ia, g.binaryExpr(s, [](double gi, double si) { return gi * si * (1.0 - si); }));
    };
  }
  return iy;
}

Value tanh(Value a) {
  Tape& t = tape_of("tanh", a);
  Matrix y = a.val().unaryExpr([](double x) { return std::tanh(x); });
  auto ia = a.id;
  auto iy = t.record(std::move(y), needs_grad(a), {});
  if (needs_grad(a)) {
    auto out_id = iy.id;
    t.node(out_id).backward = [ia, out_id](Tape& t, const Matrix& g) {
      const Matrix& y = t.node(out_id).value;
      t.accumulate(ia, g.binaryExpr(y, [](double gi, double yi) { return gi * (1.0 - yi * yi); }));
    };
  }
  return iy;
}

Value exp(Value a) {
  Tape& t = tape_of("exp", a);
  Matrix y = a.val().array().exp().matrix();
  auto ia = a.id;
  auto iy = t.record(std::move(y), needs_grad(a), {});
  if (needs_grad(a)) {
    auto out_id = iy.id;
    t.node(out_id).backward = [ia, out_id](Tape& t, const Matrix& g) {
      t.accumulate(ia, g.cwiseProduct(t.node(out_id).value));
    };
  }
  return iy;
}

Value log(Value a) {
  Tape& t = tape_of("log", a);
  Matrix y = a.val().array().log().matrix();
  auto ia = a.id;
  return t.record(std::move(y), needs_grad(a), [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, g.cwiseQuotient(t.node(ia).value));
  });
}

Value sqrt(Value a) {
  Tape& t = tape_of("sqrt", a);
  Matrix y = a.val().array().sqrt().matrix();
  auto ia = a.id;
  auto iy = t.record(std::move(y), needs_grad(a), {});
  if (needs_grad(a)) {
    auto out_id = iy.id;
    t.node(out_id).backward = [ia, out_id](Tape& t, const Matrix& g) {
      t.accumulate(ia, 0.5 * g.cwiseQuotient(t.node(out_id).value));
    };
  }
  return iy;
}

Value softmax(Value a) {
  Tape& t = tape_of("softmax", a);
  if (a.cols() != 1) shape_fail("softmax", "expected a column vector, got " + shape_str(a.val()));
  if (a.rows() == 0) shape_fail("softmax", "empty input");
  Eigen::ArrayXd x = a.val().col(0).array();
  Eigen::ArrayXd e = (x - x.maxCoeff()).exp();
  Matrix y = (e / e.sum()).matrix();
  auto ia = a.id;
  auto iy = t.record(std::move(y), needs_grad(a), {});
  if (needs_grad(a)) {
    auto out_id = iy.id;
    t.node(out_id).backward = [ia, out_id](Tape& t, const Matrix& g) {
      const Matrix& y = t.node(out_id).value;
      double gy = g.col(0).dot(y.col(0));
      t.accumulate(ia, y.cwiseProduct(g - Matrix::Constant(g.rows(), 1, gy)));
    };
  }
  return iy;
}

Value cosine_similarity(Value a, Value b, double eps) {
  Value denom = clamp_min(cwise_mul(l2_norm(a), l2_norm(b)), eps);
  return cwise_div(dot(a, b), denom);
}

Value mse(Value a, Value b) {
  Value d = sub(a, b);
  return mean(cwise_mul(d, d));
}

}  // namespace stgc
