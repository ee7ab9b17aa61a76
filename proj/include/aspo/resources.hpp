#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>

namespace aspo {

enum class Resource : std::size_t { kCpu = 0, kMem = 1, kLat = 2, kEne = 3 };

inline constexpr std::array<Resource, 4> kResources = {Resource::kCpu, Resource::kMem,
                                                       Resource::kLat, Resource::kEne};

constexpr std::string_view resource_name(Resource r) {
  switch (r) {
    case Resource::kCpu: return "cpu";
    case Resource::kMem: return "mem";
    case Resource::kLat: return "lat";
    case Resource::kEne: return "ene";
  }
  return "?";
}

// Four-component resource quantity: cpu and mem in normalised load units,
// lat in milliseconds, ene in joules. Shared layout for pattern costs and
// per-epoch headroom budgets.
template <typename Tag>
struct ResourceVector {
  double cpu = 0.0;
  double mem = 0.0;
  double lat = 0.0;
  double ene = 0.0;

  constexpr double operator[](Resource r) const {
    switch (r) {
      case Resource::kCpu: return cpu;
      case Resource::kMem: return mem;
      case Resource::kLat: return lat;
      case Resource::kEne: return ene;
    }
    return 0.0;
  }
  constexpr double& operator[](Resource r) {
    switch (r) {
      case Resource::kCpu: return cpu;
      case Resource::kMem: return mem;
      case Resource::kLat: return lat;
      default: return ene;
    }
  }

  bool valid() const {
    for (Resource r : kResources) {
      const double v = (*this)[r];
      if (!std::isfinite(v) || v < 0.0) return false;
    }
    return true;
  }

  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
};

struct CostTag {};
struct BudgetTag {};

using CostVector = ResourceVector<CostTag>;
using BudgetVector = ResourceVector<BudgetTag>;

// True when every component of `used` is within `budget`.
inline bool fits(const CostVector& used, const BudgetVector& budget) {
  for (Resource r : kResources) {
    if (used[r] > budget[r]) return false;
  }
  return true;
}

}  // namespace aspo
