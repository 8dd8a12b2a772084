#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gist/simblock.hpp"

namespace gist {

// In-batch negative selection strategies.
//   Assigned      - only the assigned negatives of the batch (qn block)
//   Bidirectional - Assigned plus the other queries (qq block)
//   FullBatch     - every other text in the batch (qp, qn, qq, pp blocks)
//   Guided        - FullBatch minus every cell the guide scores above the
//                   row's query-positive similarity
enum class Strategy { Assigned, Bidirectional, FullBatch, Guided };

std::string_view to_string(Strategy s);
/// Accepts assigned|bidirectional|fullbatch|guided.
Strategy parse_strategy(std::string_view name);

enum class Block { QP, QN, QQ, PP };
inline constexpr Block kBlocks[] = {Block::QP, Block::QN, Block::QQ, Block::PP};
std::string_view to_string(Block b);

// Nonzero = EXCLUDED from the negative candidates of that row.
struct MaskSet {
  BoolMatrix qp;
  std::optional<BoolMatrix> qn;
  BoolMatrix qq;
  BoolMatrix pp;
  std::vector<double> thresholds;  // guide sigma_qp(i, i); empty unless Guided

  std::size_t batch_size() const { return qp.rows(); }
  const BoolMatrix* block(Block b) const;
  bool operator==(const MaskSet&) const = default;
};

/// Throws ConfigError for Guided without a guide block and for Assigned when
/// the batch has no negatives; ContractError on shape disagreement.
MaskSet build_masks(const SimBlock& model_block, const GuideSimBlock* guide_block,
                    Strategy strategy);

/// Unmasked cells per row across all four blocks.
std::vector<std::size_t> count_active_negatives(const MaskSet& mask);

/// Fraction of masked cells in one block (0 when the block is absent).
double masked_fraction(const MaskSet& mask, Block b);

}  // namespace gist
