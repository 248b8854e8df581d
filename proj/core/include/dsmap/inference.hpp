#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsmap/model.hpp"

namespace dsmap {

/// Style transfer guided by an example image: x_content rendered with
/// x_style's appearance. Exactly the model's translate composition.
ImageBatch example_guided(DsmapModel& model, const ImageBatch& x_content,
                          const ImageBatch& x_style, DomainId src, DomainId dst);

/// One content image rendered under n_styles different prior style
/// draws. The styles come from a single stream seeded by `seed`, so the
/// first output equals generation with sample_style(batch, seed).
std::vector<ImageBatch> multimodal(DsmapModel& model, const ImageBatch& x_content,
                                   DomainId src, DomainId dst, int64_t n_styles,
                                   uint64_t seed);

/// (1-t)a + tb for t in [0,1]; the endpoints return exact copies.
/// Tags must match exactly: only codes living in the same space may be
/// mixed — two domain-specific codes from different domains are
/// rejected, which is the reason interpolation happens in the shared
/// space before remapping.
ContentCode lerp_codes(const ContentCode& a, const ContentCode& b, double t);
StyleCode lerp_codes(const StyleCode& a, const StyleCode& b, double t);

/// Fixed content, style swept linearly from s1 to s2 over `steps`
/// frames (uniform t over [0,1] inclusive, steps >= 2). The content
/// code is encoded once; frame 0 and the last frame equal the two
/// direct generations.
std::vector<ImageBatch> interpolate_style(DsmapModel& model, const ImageBatch& x_content,
                                          DomainId src, const StyleCode& s1,
                                          const StyleCode& s2, int64_t steps, DomainId dst);

/// Content interpolation across domains: both sources are encoded into
/// the shared space, lerped there, and every interpolant is remapped
/// into the style domain before generation with x_style's encoded
/// style.
std::vector<ImageBatch> interpolate_content_cross_domain(DsmapModel& model,
                                                         const ImageBatch& x_src_a,
                                                         const ImageBatch& x_src_b,
                                                         const ImageBatch& x_style,
                                                         DomainId style_domain, int64_t steps);

/// Writes each frame as "<mode>_t<index>_seed<seed>.png" (batch
/// elements stacked vertically) plus one "<mode>_grid_seed<seed>.png"
/// raster, one row per batch element and one column per frame. Returns
/// the written paths, grid first.
std::vector<std::string> write_frame_grid(const std::string& out_dir, const std::string& mode,
                                          uint64_t seed,
                                          const std::vector<ImageBatch>& frames);

}  // namespace dsmap
