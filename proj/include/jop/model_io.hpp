#ifndef JOP_MODEL_IO_HPP
#define JOP_MODEL_IO_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "jop/classic.hpp"
#include "jop/neural.hpp"

namespace jop::io {

// Portable container shared by all eleven model kinds:
// { format_version, kind, config, vocabulary_ref,
//   tensors: {name: {shape, data}}, metadata: {seed, train_loss_curve} }.
// Doubles serialize with round-trip precision, keys are sorted, so equal
// models produce byte-identical files.
struct TrainedModel {
    std::variant<classic::ClassicModel, neural::NeuralModel> model;
    nlohmann::json config;  // pipeline settings needed to reuse the model
    std::string vocabulary_ref;
    std::uint64_t seed = 0;
    std::vector<double> train_loss_curve;
    // Pipeline state that rides along with the model (e.g. the fitted
    // tf-idf document frequencies, stored as "tfidf.df" / "tfidf.n").
    std::map<std::string, ad::Tensor> extra_tensors;

    bool is_neural() const {
        return std::holds_alternative<neural::NeuralModel>(model);
    }
    const classic::ClassicModel& as_classic() const {
        return std::get<classic::ClassicModel>(model);
    }
    const neural::NeuralModel& as_neural() const {
        return std::get<neural::NeuralModel>(model);
    }
    std::string kind() const;
};

std::string to_json_string(const TrainedModel& tm);
TrainedModel from_json_string(const std::string& s);

void save(const TrainedModel& tm, const std::filesystem::path& path);
TrainedModel load(const std::filesystem::path& path);

} // namespace jop::io

#endif
