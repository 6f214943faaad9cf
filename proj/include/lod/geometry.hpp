#pragma once

namespace lod {

/// Axis-aligned box in continuous pixel coordinates (no +1 pixel convention).
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  double center_y() const noexcept { return 0.5 * (y_min + y_max); }

  /// Positive width and height, all coordinates finite.
  bool valid() const noexcept;
  bool inside(double image_width, double image_height) const noexcept;

  BoundingBox scaled(double s) const noexcept {
    return {x_min * s, y_min * s, x_max * s, y_max * s};
  }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Intersection over union. Throws Error(InvalidGeometry) on degenerate boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace lod
