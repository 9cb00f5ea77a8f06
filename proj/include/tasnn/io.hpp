#pragma once

#include <string>

#include "tasnn/trainer.hpp"

namespace tasnn {

enum class EventFormat { Evt1, Csv };

// evt1: "EVT1" magic, then little-endian u32 width, height, n_polarities,
// reserved(=0), u64 event count, then 10-byte records of u32 t_us, u16 x,
// u16 y, s8 p, u8 pad(=0). 28-byte header, no end-of-stream marker: reading
// restores duration as last event time + 1.
//
// csv: an optional "# width=.. height=.. n_polarities=.. duration_us=.."
// metadata line, the "t_us,x,y,p" header line, one event per line.
EventStream read_events(const std::string& path, EventFormat format);
void write_events(const EventStream& stream, const std::string& path,
                  EventFormat format);

EventFormat format_from_path(const std::string& path);

// On-disk dataset: dataset.json with the geometry, index.csv with
// file,label,split rows, and one evt1 file per sample.
void write_dataset_dir(const Dataset& train, const Dataset& test,
                       const std::string& dir);
enum class SplitSel { Train, Test, All };
Dataset load_dataset_dir(const std::string& dir, SplitSel split);

}  // namespace tasnn
