#pragma once

#include <string>

#include "pdfold/ppnet.hpp"
#include "pdfold/scorenet.hpp"

namespace pdfold {

// A self-describing model file: every score-network tensor with its shape,
// the post-processing parameters, the one-hot base order and the position
// feature family tag, plus the training configuration verbatim when the
// checkpoint came out of a training run.
struct Checkpoint {
    ScoreNetParams score;
    PpParams pp;
    std::string base_order = kBaseOrder;
    std::string psi_family = kPsiFamilyTag;
    std::string train_config_json;  // empty if not produced by training
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& json_text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pdfold
