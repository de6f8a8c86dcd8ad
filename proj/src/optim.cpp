#include "stgc/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace stgc {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  slots_.reserve(params_.size());
  for (Parameter* p : params_) {
    Slot s;
    s.m = Matrix::Zero(p->value.rows(), p->value.cols());
    s.v = Matrix::Zero(p->value.rows(), p->value.cols());
    slots_.push_back(std::move(s));
  }
}

void AdamW::step() {
  bool any = false;
  for (Parameter* p : params_) any = any || p->has_grad;
  if (!any)
    throw std::runtime_error("adamw_step: no gradients present; call backward() before step()");

  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Slot& s = slots_[i];
    if (cfg_.weight_decay != 0.0) p.value *= (1.0 - cfg_.lr * cfg_.weight_decay);
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * p.grad;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * p.grad.cwiseProduct(p.grad);
    Matrix m_hat = s.m / bc1;
    Matrix v_hat = s.v / bc2;
    p.value -= cfg_.lr * m_hat.cwiseQuotient(v_hat.cwiseSqrt() + Matrix::Constant(v_hat.rows(), v_hat.cols(), cfg_.eps));
    p.zero_grad();
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

}  // namespace stgc
