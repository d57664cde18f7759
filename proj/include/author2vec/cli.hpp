// SPDX-License-Identifier: Apache-2.0
#pragma once

// Command-line driver. Commands read and write stage directories under one
// run root:
//
//   data/            synth             posts.jsonl labels.csv vocab.txt wordvec.txt
//   ingest/          ingest            corpus.jsonl labels.csv stats.json post_embeddings.av1
//   pretrain/        pretrain          model.ckpt last.ckpt training_log.json
//   embed/           embed-authors     author_embeddings.av1 author_embeddings.csv encoder.ckpt
//   baseline-<kind>/ baseline <kind>   user_embeddings.av1 model file, info.json
//   eval-<task>/     eval <task>       report JSON per (embedding, probe), table.txt
//   viz/             viz               <embedding>-<attribute>.svg / .csv
//
// Each directory gets a manifest.json (see manifest.hpp).

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace a2v::cli {

/// Runs one command; `args` excludes the program name. Returns the exit code
/// (0 ok, 2 config, 3 data, 4 numeric, 5 I/O, 1 anything else).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

nlohmann::json default_config();

/// `dotted.key=value`; value is parsed as JSON when possible, else taken as a
/// string. The key must already exist in `config`.
void apply_override(nlohmann::json& config, const std::string& assignment);

}  // namespace a2v::cli
