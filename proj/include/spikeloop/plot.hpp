#pragma once

// Static SVG figures rendered from logged data.

#include "spikeloop/robot_sim.hpp"
#include "spikeloop/simulator.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace spikeloop {

struct RasterLayout {
    // (population, size) in lane order, top to bottom. Empty: one lane per
    // (population, neuron) that occurs in the raster, sorted by name then index.
    std::vector<std::pair<std::string, int>> populations;
    TimeUs t_end = 0; // 0: last spike time
    std::string title;
    double width = 900.0;
    double lane_height = 14.0;
};

// Every population of `net` in declaration order.
RasterLayout layout_for(const NetworkSpec& net);
// Only the named populations, in the given order.
RasterLayout layout_for(const NetworkSpec& net, const std::vector<std::string>& populations);

// One lane per (population, neuron), one `<line class="spike">` per spike.
// Spikes outside the lanes are skipped. An empty raster gives the axes only.
std::string emit_raster_svg(std::span<const RasterRecord> raster, const RasterLayout& layout);

// Joint angle over time with the coarse-bin boundaries as grid lines.
std::string emit_trace_svg(std::span<const JointTraceRow> trace, const EncoderConfig& encoder,
                           const std::string& title = {});

} // namespace spikeloop
