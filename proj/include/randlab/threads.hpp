#pragma once

#include <functional>

namespace randlab {

// Runs fn(task_index, worker_index) for every task in [0, num_tasks).
// Tasks are claimed from a shared counter; results must be written to
// task-indexed slots (or worker-owned scratch) so the outcome is identical
// for any thread count and schedule.
void parallel_for(int num_tasks, int num_threads, const std::function<void(int, int)>& fn);

int default_threads();

}  // namespace randlab
