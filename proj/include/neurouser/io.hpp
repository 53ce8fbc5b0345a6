#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "neurouser/clustering.hpp"
#include "neurouser/cohort.hpp"
#include "neurouser/fitting.hpp"
#include "neurouser/user_model.hpp"

namespace neurouser {

using json = nlohmann::json;

void to_json(json& j, const RatingScale& scale);
void from_json(const json& j, RatingScale& scale);
void to_json(json& j, const TuningCurve& curve);
void from_json(const json& j, TuningCurve& curve);
/// Accepts either an explicit "curves" list or layout fields
/// ("neurons", "g", "f0", "w", "margin") passed to build_population.
void to_json(json& j, const Population& pop);
void from_json(const json& j, Population& pop);
void to_json(json& j, const PopulationParams& p);
void from_json(const json& j, PopulationParams& p);
void to_json(json& j, const SearchGrid& grid);
void from_json(const json& j, SearchGrid& grid);
/// -inf tabulated log-densities are written as null.
void to_json(json& j, const Prior& prior);
void from_json(const json& j, Prior& prior);
void to_json(json& j, const DecoderSpec& spec);
void from_json(const json& j, DecoderSpec& spec);
void to_json(json& j, const UserModel& model);
void from_json(const json& j, UserModel& model);
void to_json(json& j, const ParamBounds& b);
void from_json(const json& j, ParamBounds& b);
/// Missing keys keep their defaults.
void to_json(json& j, const FitConfig& cfg);
void from_json(const json& j, FitConfig& cfg);
void to_json(json& j, const FitResult& fit);
void from_json(const json& j, FitResult& fit);
void to_json(json& j, const ParetoFit& fit);
void to_json(json& j, const ClusterResult& result);

json read_json(const std::filesystem::path& path);
/// Pretty-printed, keys sorted, trailing newline.
void write_json(const std::filesystem::path& path, const json& doc);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

/// Reads `user_id,item_id,trial,rating` CSV. Ratings within 1e-9 of a
/// category are snapped to it. Errors name the offending line.
std::vector<RatingObservation> ingest_ratings(const std::filesystem::path& path, const RatingScale& scale);
void write_ratings(const std::filesystem::path& path, std::span<const RatingObservation> obs);

/// `trial,neuron_index,preferred_value,count` for trials 1..n_trials; trial t
/// is sample_response with derive_rng(seed, t).
void emit_raster(const UserModel& model, double s, std::size_t n_trials, std::uint64_t seed,
                 const std::filesystem::path& path);

/// Grid rows `s,expected_activity,log_likelihood[,log_posterior]` and a
/// one-row `decoder,estimate,rating` record at `estimate_path`.
/// expected_activity(x) is the expected count of a neuron preferring x when
/// the stimulus is `stimulus`. The grid is the decoder's (MLD/MAD) or the
/// population's default grid. `seed` drives MVD tie-breaks.
Estimate emit_decoder_profile(const UserModel& model, const PopulationResponse& resp, double stimulus,
                              std::uint64_t seed, const std::filesystem::path& path,
                              const std::filesystem::path& estimate_path);

/// `category,probability`
void write_rating_pmf(const std::filesystem::path& path, const RatingPMF& pmf, const RatingScale& scale);
/// `s,mse,fraction,mean,variance`
void write_reliability(const std::filesystem::path& path, const ReliabilityProfile& profile);

struct RunManifest {
    std::string command;
    json config;
    std::uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string version;
};

void to_json(json& j, const RunManifest& m);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

inline constexpr const char* tool_version = "1.0.0";

} // namespace neurouser
