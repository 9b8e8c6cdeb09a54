#pragma once

#include <string>
#include <variant>

#include "sectorflow/models.hpp"

namespace sectorflow::model_io {

// Linear baseline "model": the jitter scale is the whole parameterization.
struct LinearModelFile {
    double sigma_jitter_deg = 0.05;
};

using AnyModel = std::variant<LinearModelFile, models::EnsembleModel, models::BnnModel>;

std::string model_kind(const AnyModel& m);  // "linear" | "de" | "bnn"

// SFMODEL1 container: 8-byte magic, u32 little-endian header length, JSON
// header (sorted keys), then the f64 little-endian blocks the header lists.
// Byte-for-byte deterministic for identical models.
void save_model(const std::string& path, const AnyModel& model);
AnyModel load_model(const std::string& path);

}  // namespace sectorflow::model_io
