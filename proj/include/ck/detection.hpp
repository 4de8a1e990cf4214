#pragma once

#include "ck/error.hpp"

namespace ck {

// Axis-aligned box in pixel coordinates.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double area() const { return (x_max - x_min) * (y_max - y_min); }
    bool valid() const { return x_min < x_max && y_min < y_max; }
};

// One ground-truth or predicted object.
struct Detection {
    int class_id = 0;
    Box box;
    double score = 1.0;
};

}  // namespace ck
