#pragma once

#include <filesystem>
#include <string>

#include "affectloop/augment.hpp"
#include "json.hpp"

namespace affectloop {

/// Hyperparameters handed to an external trainer alongside the exported manifest.
struct TrainingRecipe {
    std::string optimizer = "adam";
    double learning_rate = 3e-4;
    double beta1 = 0.99;
    double beta2 = 0.999;
    std::string loss = "categorical_cross_entropy";
    int convergence_patience_epochs = 20;
    int batch_size = 1643;
    std::string backbone = "resnet152_imagenet_pretrained";
    bool retrain_all_layers = true;
    AugmentConfig augmentation;
};

nlohmann::json to_json(const TrainingRecipe& recipe);
TrainingRecipe training_recipe_from_json(const nlohmann::json& j);

/// Canonical text: keys sorted, two-space indent, trailing newline.
std::string training_config_text(const TrainingRecipe& recipe = {});

void write_training_config(const std::filesystem::path& path, const TrainingRecipe& recipe = {});

}  // namespace affectloop
