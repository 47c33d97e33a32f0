#pragma once

#include <cstddef>
#include <functional>

namespace omt {

/// Runs body(i) for i in [0, count) on up to `workers` threads. Indices are
/// claimed dynamically; callers write results into index-addressed slots so
/// the outcome does not depend on the worker count. The first exception
/// thrown by any body is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace omt
