#pragma once

#include <map>
#include <string>
#include <vector>

#include "ldp/tensor.hpp"

namespace ldp {

// Named-array archive (.lda). Layout:
//   bytes 0..7   magic "LDPARCH1"
//   bytes 8..15  uint64 little-endian manifest byte length
//   manifest     UTF-8 JSON: {"arrays":[{"name","shape","dtype","offset","nbytes"}...],
//                             "meta":{string:string}}
//   data         raw little-endian float64 payloads at manifest offsets,
//                relative to the end of the manifest
struct Archive {
    std::map<std::string, Tensor> arrays;
    std::map<std::string, std::string> meta;
};

void write_archive(const std::string& path, const std::vector<std::pair<std::string, Tensor>>& arrays,
                   const std::map<std::string, std::string>& meta = {});

// throws LoadError naming the path on any problem
Archive read_archive(const std::string& path);

}  // namespace ldp
