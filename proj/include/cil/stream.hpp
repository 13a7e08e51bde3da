#pragma once

#include <cstdint>
#include <vector>

#include "cil/data.hpp"

namespace cil {

struct Task {
  std::vector<int> labels;  // ascending, disjoint across tasks
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Ordered class-incremental tasks over one dataset. Train-data reads are
// funneled through read_train_features so isolation violations (touching an
// old task's train data) are counted, not silent.
class TaskStream {
 public:
  static TaskStream split_stream(Dataset ds, std::size_t base_classes,
                                 std::size_t inc_classes, std::uint64_t seed);

  std::size_t num_tasks() const { return tasks_.size(); }
  const Task& task(std::size_t t) const;
  const Dataset& dataset() const { return ds_; }
  std::size_t total_classes() const { return ds_.num_classes; }
  std::size_t classes_through(std::size_t t) const;  // cumulative count

  void begin_task(std::size_t t);
  // Materializes train rows of task `owner`, logging a forbidden read when
  // owner is not the current task.
  Tensor read_train_features(std::size_t owner,
                             const std::vector<std::size_t>& rows);
  std::size_t forbidden_reads() const { return forbidden_reads_; }

  // Test data is never isolation-restricted: evaluation runs on the union of
  // everything seen so far.
  Tensor test_features(const std::vector<std::size_t>& rows) const;

 private:
  Dataset ds_;
  std::vector<Task> tasks_;
  std::size_t current_task_ = 0;
  std::size_t forbidden_reads_ = 0;
};

}  // namespace cil
