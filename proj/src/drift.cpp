#include "arratia/drift.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace arratia {

namespace {

double parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw std::invalid_argument(fmt::format("drift: not a number: '{}'", s));
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

DriftSpec DriftSpec::zero() { return DriftSpec{}; }

DriftSpec DriftSpec::constant(double c) {
  if (!std::isfinite(c)) throw std::invalid_argument("DriftSpec::constant: value must be finite");
  DriftSpec d;
  d.kind_ = Kind::constant;
  d.c_ = c;
  d.sup_ = std::abs(c);
  return d;
}

DriftSpec DriftSpec::affine_clamped(double alpha, double beta, double lo, double hi) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || std::isnan(lo) || std::isnan(hi) || lo > hi)
    throw std::invalid_argument("DriftSpec::affine_clamped: need finite alpha, beta and lo <= hi");
  DriftSpec d;
  d.kind_ = Kind::affine_clamped;
  d.alpha_ = alpha;
  d.beta_ = beta;
  d.lo_ = lo;
  d.hi_ = hi;
  d.lipschitz_ = lo < hi ? std::abs(alpha) : 0.0;
  d.sup_ = std::max(std::abs(lo), std::abs(hi));
  return d;
}

DriftSpec DriftSpec::tabulated(std::vector<double> xs, std::vector<double> as) {
  if (xs.empty() || xs.size() != as.size())
    throw std::invalid_argument("DriftSpec::tabulated: need equally sized, non-empty tables");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1]))
      throw std::invalid_argument("DriftSpec::tabulated: abscissae must be strictly ascending");
  DriftSpec d;
  d.kind_ = Kind::tabulated;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.sup_ = std::max(d.sup_, std::abs(as[i]));
    if (i > 0) d.lipschitz_ = std::max(d.lipschitz_, std::abs((as[i] - as[i - 1]) / (xs[i] - xs[i - 1])));
  }
  d.xs_ = std::move(xs);
  d.as_ = std::move(as);
  return d;
}

double DriftSpec::operator()(double x) const {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::constant:
      return c_;
    case Kind::affine_clamped:
      return std::clamp(alpha_ * x + beta_, lo_, hi_);
    case Kind::tabulated: {
      if (x <= xs_.front()) return as_.front();
      if (x >= xs_.back()) return as_.back();
      auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      const auto i = static_cast<std::size_t>(it - xs_.begin());
      const double w = (x - xs_[i - 1]) / (xs_[i] - xs_[i - 1]);
      return as_[i - 1] + w * (as_[i] - as_[i - 1]);
    }
  }
  return 0.0;
}

std::string DriftSpec::describe() const {
  switch (kind_) {
    case Kind::zero:
      return "zero";
    case Kind::constant:
      return fmt::format("constant:{}", c_);
    case Kind::affine_clamped:
      return fmt::format("affine:{},{},{},{}", alpha_, beta_, lo_, hi_);
    case Kind::tabulated: {
      std::string s = "table:";
      for (std::size_t i = 0; i < xs_.size(); ++i)
        s += fmt::format("{}{}:{}", i ? ";" : "", xs_[i], as_[i]);
      return s;
    }
  }
  return "zero";
}

DriftSpec DriftSpec::parse(std::string_view text) {
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  const auto body = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "zero" && colon == std::string_view::npos) return zero();
  if (head == "constant") return constant(parse_double(body));
  if (head == "affine") {
    auto parts = split(body, ',');
    if (parts.size() != 4) throw std::invalid_argument("drift: affine needs alpha,beta,lo,hi");
    return affine_clamped(parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2]),
                          parse_double(parts[3]));
  }
  if (head == "table") {
    std::vector<double> xs, as;
    for (auto entry : split(body, ';')) {
      auto xy = split(entry, ':');
      if (xy.size() != 2) throw std::invalid_argument("drift: table entries are x:a");
      xs.push_back(parse_double(xy[0]));
      as.push_back(parse_double(xy[1]));
    }
    return tabulated(std::move(xs), std::move(as));
  }
  throw std::invalid_argument(fmt::format("drift: unknown specification '{}'", text));
}

double drift_increment(const DriftSpec& drift, double x, double dt) {
  switch (drift.kind()) {
    case DriftSpec::Kind::zero:
      return 0.0;
    case DriftSpec::Kind::constant:
      return drift.constant_value() * dt;
    default:
      return drift(x) * dt;
  }
}

}  // namespace arratia
