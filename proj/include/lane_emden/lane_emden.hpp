#pragma once

// Everything except the batch runner (runner.hpp needs spdlog).
#include "lane_emden/concentration.hpp"
#include "lane_emden/diagnostics.hpp"
#include "lane_emden/elliptic_solver.hpp"
#include "lane_emden/error.hpp"
#include "lane_emden/field.hpp"
#include "lane_emden/geometry.hpp"
#include "lane_emden/green_function.hpp"
#include "lane_emden/grid.hpp"
#include "lane_emden/io.hpp"
#include "lane_emden/laplacian.hpp"
#include "lane_emden/liouville.hpp"
#include "lane_emden/parallel.hpp"
#include "lane_emden/radial_oracle.hpp"
#include "lane_emden/solution_view.hpp"
