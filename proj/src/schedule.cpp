#include "sgdnoise/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sgdnoise {
namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_nonnegative(double lr, const char* what) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) {
    throw std::invalid_argument(std::string(what) + ": learning rate must be finite and >= 0");
  }
}

}  // namespace

std::string to_string(AveragingMethod method) {
  switch (method) {
    case AveragingMethod::swa: return "swa";
    case AveragingMethod::two_point: return "two_point";
    case AveragingMethod::ema: return "ema";
  }
  return "unknown";
}

AveragingMethod averaging_method_from_string(const std::string& name) {
  if (name == "swa") return AveragingMethod::swa;
  if (name == "two_point") return AveragingMethod::two_point;
  if (name == "ema") return AveragingMethod::ema;
  throw std::invalid_argument("unknown averaging method '" + name + "' (expected swa, two_point or ema)");
}

double WindowTransform::multiplier(std::uint64_t step) const {
  if (step < t1 || step >= t2) return 1.0;
  const double k = double(t2 - t1);
  switch (method) {
    case AveragingMethod::swa: {
      // 1-based offset into the window: the first step keeps its full rate,
      // the last one gets 1/k.
      const double i = double(step - t1 + 1);
      return (k + 1.0 - i) / k;
    }
    case AveragingMethod::two_point:
      return 0.5;
    case AveragingMethod::ema:
      // Exponent counts the iterates that see this step's update: t2 - step.
      return 1.0 - std::pow(1.0 - ema_decay, double(t2 - step));
  }
  return 1.0;
}

Schedule Schedule::constant(double lr) {
  require_nonnegative(lr, "constant schedule");
  return Schedule(Constant{lr});
}

Schedule Schedule::linear_decay(double lr0, std::uint64_t horizon) {
  require_nonnegative(lr0, "linear_decay schedule");
  if (horizon == 0) throw std::invalid_argument("linear_decay schedule: horizon must be positive");
  return Schedule(LinearDecay{lr0, horizon});
}

Schedule Schedule::cosine(double lr0, std::uint64_t horizon) {
  require_nonnegative(lr0, "cosine schedule");
  if (horizon == 0) throw std::invalid_argument("cosine schedule: horizon must be positive");
  return Schedule(Cosine{lr0, horizon});
}

Schedule Schedule::table(std::vector<std::pair<std::uint64_t, double>> points) {
  if (points.empty()) throw std::invalid_argument("table schedule: needs at least one point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    require_nonnegative(points[i].second, "table schedule");
    if (i > 0 && points[i].first <= points[i - 1].first) {
      throw std::invalid_argument("table schedule: steps must be strictly increasing");
    }
  }
  return Schedule(Table{std::move(points)});
}

Schedule Schedule::derived(Schedule base, WindowTransform transform) {
  if (transform.t2 <= transform.t1) throw std::invalid_argument("derived schedule: window needs t2 > t1");
  if (transform.method == AveragingMethod::ema &&
      !(transform.ema_decay > 0.0 && transform.ema_decay < 1.0)) {
    throw std::invalid_argument("derived schedule: EMA decay must lie in (0, 1)");
  }
  return Schedule(Derived{std::make_shared<const Schedule>(std::move(base)), transform});
}

double Schedule::eval(std::uint64_t step) const {
  return std::visit(
      overloaded{
          [](const Constant& c) { return c.lr; },
          [step](const LinearDecay& l) {
            if (step >= l.horizon) return 0.0;
            return l.lr0 * double(l.horizon - step) / double(l.horizon);
          },
          [step](const Cosine& c) {
            if (step >= c.horizon) return 0.0;
            return 0.5 * c.lr0 * (1.0 + std::cos(std::numbers::pi * double(step) / double(c.horizon)));
          },
          [step](const Table& t) {
            if (step < t.points.front().first || step > t.points.back().first) {
              std::ostringstream os;
              os << "table schedule: step " << step << " outside [" << t.points.front().first << ", "
                 << t.points.back().first << "]";
              throw std::out_of_range(os.str());
            }
            auto it = std::upper_bound(t.points.begin(), t.points.end(), step,
                                       [](std::uint64_t s, const auto& p) { return s < p.first; });
            return std::prev(it)->second;
          },
          [step](const Derived& d) { return d.base->eval(step) * d.transform.multiplier(step); },
      },
      v_);
}

std::pair<std::uint64_t, std::optional<std::uint64_t>> Schedule::domain() const {
  if (const auto* t = std::get_if<Table>(&v_)) return {t->points.front().first, t->points.back().first};
  if (const auto* d = std::get_if<Derived>(&v_)) return d->base->domain();
  return {0, std::nullopt};
}

bool Schedule::contains(std::uint64_t step) const {
  const auto [lo, hi] = domain();
  return step >= lo && (!hi || step <= *hi);
}

std::string Schedule::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const Constant& c) { os << "constant(" << c.lr << ")"; },
                 [&](const LinearDecay& l) { os << "linear_decay(" << l.lr0 << ", " << l.horizon << ")"; },
                 [&](const Cosine& c) { os << "cosine(" << c.lr0 << ", " << c.horizon << ")"; },
                 [&](const Table& t) { os << "table(" << t.points.size() << " points)"; },
                 [&](const Derived& d) {
                   os << "derived(" << d.base->describe() << ", " << to_string(d.transform.method) << " ["
                      << d.transform.t1 << ", " << d.transform.t2 << ")";
                   if (d.transform.method == AveragingMethod::ema) os << ", delta=" << d.transform.ema_decay;
                   os << ")";
                 },
             },
             v_);
  return os.str();
}

}  // namespace sgdnoise
