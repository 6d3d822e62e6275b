#pragma once
#include <cmath>
#include <limits>

namespace respira::train {

// Halves the learning rate after `patience` consecutive epochs without the
// monitored loss improving by more than min_delta (min mode).
class PlateauScheduler {
public:
  PlateauScheduler(double initial_lr, double factor = 0.5, int patience = 4,
                   double min_delta = 1e-4)
      : lr_(initial_lr), factor_(factor), patience_(patience), min_delta_(min_delta) {}

  // Call once per epoch with the monitored value; returns true if the lr was
  // reduced on this call.
  bool step(double monitored) {
    if (monitored < best_ - min_delta_) {
      best_ = monitored;
      wait_ = 0;
      return false;
    }
    ++wait_;
    if (wait_ >= patience_) {
      lr_ *= factor_;
      wait_ = 0;
      return true;
    }
    return false;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

private:
  double lr_;
  double factor_;
  int patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  int wait_ = 0;
};

// Stops after `patience` consecutive epochs without the monitored metric
// improving (max mode; any strictly greater value counts as improvement).
class EarlyStopping {
public:
  explicit EarlyStopping(int patience = 12) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool step(double monitored) {
    if (monitored > best_) {
      best_ = monitored;
      wait_ = 0;
      return false;
    }
    ++wait_;
    return wait_ >= patience_;
  }

  double best() const { return best_; }

private:
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int wait_ = 0;
};

}  // namespace respira::train
