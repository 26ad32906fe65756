#include "coda/records.hpp"

#include <string>

#include "coda/errors.hpp"

namespace coda {

void record_append(RunResult& result, IterationRecord rec) {
  if (!result.records.empty()) {
    const IterationRecord& last = result.records.back();
    if (rec.t <= last.t) {
      throw OrderingError("record_append: t=" + std::to_string(rec.t) +
                          " does not follow t=" + std::to_string(last.t));
    }
    if (rec.samples_used < last.samples_used) {
      throw OrderingError("record_append: samples_used decreased from " +
                          std::to_string(last.samples_used) + " to " +
                          std::to_string(rec.samples_used));
    }
  }
  result.records.push_back(std::move(rec));
}

}  // namespace coda
