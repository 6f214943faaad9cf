#include "lod/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lod/error.hpp"

namespace lod {

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return 2;
    case ErrorKind::MissingInput: return 3;
    case ErrorKind::Format: return 4;
    case ErrorKind::Validation: return 5;
    case ErrorKind::StageMismatch: return 6;
    case ErrorKind::Numerical: return 7;
    case ErrorKind::InvalidGeometry: return 8;
  }
  return 1;
}

bool BoundingBox::valid() const noexcept {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_max > x_min && y_max > y_min;
}

bool BoundingBox::inside(double image_width, double image_height) const noexcept {
  return x_min >= 0.0 && y_min >= 0.0 && x_max <= image_width && y_max <= image_height;
}

namespace {

void require_valid(const BoundingBox& b) {
  if (!b.valid()) {
    std::ostringstream os;
    os << "degenerate box [" << b.x_min << ", " << b.y_min << ", " << b.x_max << ", "
       << b.y_max << "]";
    fail(ErrorKind::InvalidGeometry, os.str());
  }
}

}  // namespace

double iou(const BoundingBox& a, const BoundingBox& b) {
  require_valid(a);
  require_valid(b);
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace lod
