#include "affectloop/training_config.hpp"

#include <fstream>

#include "affectloop/error.hpp"

namespace affectloop {

nlohmann::json to_json(const TrainingRecipe& r) {
    return {
        {"optimizer", r.optimizer},
        {"lr", r.learning_rate},
        {"beta1", r.beta1},
        {"beta2", r.beta2},
        {"loss", r.loss},
        {"convergence_patience_epochs", r.convergence_patience_epochs},
        {"batch_size", r.batch_size},
        {"backbone", r.backbone},
        {"retrain_all_layers", r.retrain_all_layers},
        {"augmentation", r.augmentation.to_json()},
    };
}

TrainingRecipe training_recipe_from_json(const nlohmann::json& j) {
    TrainingRecipe r;
    r.optimizer = j.at("optimizer").get<std::string>();
    r.learning_rate = j.at("lr").get<double>();
    r.beta1 = j.at("beta1").get<double>();
    r.beta2 = j.at("beta2").get<double>();
    r.loss = j.at("loss").get<std::string>();
    r.convergence_patience_epochs = j.at("convergence_patience_epochs").get<int>();
    r.batch_size = j.at("batch_size").get<int>();
    r.backbone = j.at("backbone").get<std::string>();
    r.retrain_all_layers = j.at("retrain_all_layers").get<bool>();
    r.augmentation = AugmentConfig::from_json(j.at("augmentation"));
    return r;
}

std::string training_config_text(const TrainingRecipe& recipe) {
    // nlohmann::json keeps object keys sorted, which fixes the key order.
    return to_json(recipe).dump(2) + "\n";
}

void write_training_config(const std::filesystem::path& path, const TrainingRecipe& recipe) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << training_config_text(recipe);
    if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace affectloop
