#pragma once

#include <string>
#include <vector>

namespace capflow {

enum class GridMode { axisym, full2d };

struct HemisphereGrid {
  GridMode mode = GridMode::axisym;
  int n = 2;
  int n_beta = 64;
  int n_xi = 1;  // 1 in axisym mode

  HemisphereGrid() = default;
  HemisphereGrid(GridMode mode, int n, int n_beta, int n_xi = 1);

  // "axisym:<n_beta>" or "full2d:<n_beta>x<n_xi>"
  static HemisphereGrid parse(const std::string& spec, int n);
  std::string spec() const;

  double h_beta() const;
  double h_xi() const;
  double beta(int i) const;
  double xi(int j) const;
  int nodes() const { return n_beta * n_xi; }
  int index(int i, int j) const { return i * n_xi + j; }
  bool axisym() const { return mode == GridMode::axisym; }
};

struct GraphState {
  std::vector<double> u;      // n_beta * n_xi, beta-major
  std::vector<double> ghost;  // n_xi values at beta = pi/2 + h
  double t = 0.0;
};

GraphState make_state(const HemisphereGrid& grid, double value = 0.0);

}  // namespace capflow
