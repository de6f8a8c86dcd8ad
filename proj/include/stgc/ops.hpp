#pragma once

#include <span>
#include <vector>

#include "stgc/tape.hpp"

namespace stgc {

// Differentiable operations over tape values. All functions evaluate eagerly
// and record a backward rule when any input requires grad. Shape mismatches
// throw std::invalid_argument naming the op and the offending shapes.

Value constant(Tape& tape, Matrix m);
Value scalar(Tape& tape, double x);
Value leaf(Tape& tape, Parameter& p);

Value matmul(Value a, Value b);
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value cwise_mul(Value a, Value b);
Value cwise_div(Value a, Value b);
Value scale(Value a, double c);
Value transpose(Value a);

/// Stack column blocks vertically / horizontally.
Value vcat(std::span<const Value> parts);
Value hcat(std::span<const Value> parts);
inline Value vcat(std::initializer_list<Value> parts) { return vcat(std::span<const Value>(parts.begin(), parts.size())); }
inline Value hcat(std::initializer_list<Value> parts) { return hcat(std::span<const Value>(parts.begin(), parts.size())); }

Value dot(Value a, Value b);  // column vectors
Value sum(Value a);
Value mean(Value a);
Value l2_norm(Value a);  // Frobenius norm; gradient undefined at exactly zero

Value leaky_relu(Value a, double negative_slope = 0.2);
Value relu(Value a);
Value clamp_min(Value a, double floor);
Value sigmoid(Value a);
Value tanh(Value a);
Value exp(Value a);
Value log(Value a);   // domain: strictly positive entries
Value sqrt(Value a);  // domain: strictly positive entries

/// Softmax over a column vector; output is nonnegative and sums to one.
Value softmax(Value a);

/// dot(a,b) / max(|a||b|, eps) for column vectors a, b.
Value cosine_similarity(Value a, Value b, double eps = 1e-12);

/// Mean over elements of the squared difference.
Value mse(Value a, Value b);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(double c, Value a) { return scale(a, c); }

}  // namespace stgc
