#pragma once

#include <string>

#include "vlfsig/datagen.hpp"

namespace vlfsig {

// Binary dataset layout, little-endian throughout:
//   magic "VLFD" | version u16 | record count u32 | record length u32 |
//   per record: label u8, then record-length f32 samples.
inline constexpr char kDatasetMagic[4] = {'V', 'L', 'F', 'D'};
inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 14;

std::size_t dataset_file_bytes(std::size_t n_records, std::size_t record_len);

void write_dataset(const std::string& path, const datagen::Dataset& records, bool force);
datagen::Dataset read_dataset(const std::string& path);

// CSV twin: header "label,s0,...,s{L-1}", one record per row.
void write_dataset_csv(const std::string& path, const datagen::Dataset& records, bool force);
datagen::Dataset read_dataset_csv(const std::string& path);

}  // namespace vlfsig
