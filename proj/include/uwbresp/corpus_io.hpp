#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uwbresp/radar_sim.hpp"

namespace uwbresp {

using Json = nlohmann::json;

Json to_json(const RadarConfig& c);
RadarConfig radar_config_from_json(const Json& j);
Json to_json(const Scene& s);
Scene scene_from_json(const Json& j);

/// Raw little-endian float32 array I/O. Matrices are written row-major, so for
/// a signal matrix the fast-time bin is the leading (slowest) index.
void write_f32(const std::filesystem::path& path, std::span<const float> data);
std::vector<float> read_f32(const std::filesystem::path& path);
void write_matrix_f32(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_f32(const std::filesystem::path& path, Index rows, Index cols);
void write_vector_f32(const std::filesystem::path& path, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector_f32(const std::filesystem::path& path, Index size);

/// Corpus layout:
///   manifest.json               radar config, window length, ordered record names
///   rec_NNNNNN.json             shapes, frame rate, bin spacing, scene, seed, rotation
///   rec_NNNNNN.i.f32 / .q.f32   I and Q planes, bins x frames, row-major
///   rec_NNNNNN.truth.f32        ground-truth displacement
void write_corpus(const std::filesystem::path& dir, const Dataset& ds, const std::vector<double>& rotations = {});
Dataset read_corpus(const std::filesystem::path& dir);

/// Rotation of every record in the I/Q plane, `count` angles per record.
Dataset rotate_corpus(const Dataset& ds, int count, std::vector<double>* rotations = nullptr);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace uwbresp
