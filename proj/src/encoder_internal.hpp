#pragma once

#include "geoattack/model.hpp"

namespace geoattack {

// projected = W_input x + bias
void lstm_project(const RecurrentEncoder& enc, std::span<const double> x, Vec& projected);
// One LSTM step from a precomputed input projection; `gates` receives the
// activated gate values.
void lstm_cell(const RecurrentEncoder& enc, std::span<const double> projected, std::span<const double> h_prev,
               std::span<const double> c_prev, Vec& gates, Vec& c, Vec& h);

}  // namespace geoattack
