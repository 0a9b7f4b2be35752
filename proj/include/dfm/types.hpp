#pragma once

namespace dfm {

/// Discrete conditioning triple: instrument class, pitch and velocity level.
struct ConditionSet {
  int class_id = 0;
  int pitch_id = 0;
  int velocity_id = 0;

  bool operator==(const ConditionSet&) const = default;
};

}  // namespace dfm
