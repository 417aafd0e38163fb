#pragma once

#include "riccati_geo/riccati_geo.h"

#include <memory>
#include <string>

namespace riccati_geo::cli {

template <class T, void (*Destroy)(T*)>
struct HandleDeleter {
  void operator()(T* p) const noexcept { Destroy(p); }
};

using SystemHandle = std::unique_ptr<rg_system, HandleDeleter<rg_system, rg_system_destroy>>;
using FullFilterHandle =
    std::unique_ptr<rg_full_filter, HandleDeleter<rg_full_filter, rg_full_filter_destroy>>;
using LowRankFilterHandle =
    std::unique_ptr<rg_lowrank_filter, HandleDeleter<rg_lowrank_filter, rg_lowrank_filter_destroy>>;
using TruthHandle = std::unique_ptr<rg_truth, HandleDeleter<rg_truth, rg_truth_destroy>>;
using ReportHandle = std::unique_ptr<rg_report, HandleDeleter<rg_report, rg_report_destroy>>;

/// Throws ConfigError for statuses caused by bad input and NumericError for
/// failures of the numerics; the message carries rg_last_error().
void check(rg_status status, const std::string& context);

}  // namespace riccati_geo::cli
