#pragma once

#include <string>

namespace fusad {

enum class Task { classification, forecasting, anomaly };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

}  // namespace fusad
