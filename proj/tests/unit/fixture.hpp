// Copyright Contributors to the semsplat Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <mutex>
#include <random>
#include <string>

#include <unistd.h>

#include "semsplat/checkpoint.hpp"
#include "semsplat/dataset.hpp"
#include "semsplat/synthetic.hpp"
#include "semsplat/trainer.hpp"

namespace semsplat::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() /
                                      ("semsplat_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline SyntheticSpec tiny_spec() {
    SyntheticSpec s;
    s.classes = 3;
    s.frames = 9;
    s.width = 32;
    s.height = 32;
    s.seed = 0;
    return s;
}

inline TrainConfig tiny_train_config() {
    TrainConfig c;
    c.iterations = 30;
    c.psnr_every = 10;
    return c;
}

/// A small scene with codec and a briefly trained checkpoint, built once per process.
/// Layout: <dir>/manifest.json, <dir>/codec, <dir>/lexicon.json, <dir>/checkpoint.
inline const std::filesystem::path& trained_fixture() {
    static std::filesystem::path dir;
    static std::once_flag once;
    std::call_once(once, [] {
        dir = temp_dir("fixture");
        write_synthetic_dataset(tiny_spec(), dir);
        CodecTrainOptions co;
        co.epochs = 3;
        co.max_samples = 3000;
        codec_train_dataset(dir / "manifest.json", co);
        const Dataset ds = load_dataset(dir / "manifest.json");
        save_checkpoint(train_scene(ds, tiny_train_config()).checkpoint, dir / "checkpoint");
    });
    return dir;
}

}  // namespace semsplat::testing
