#pragma once

// Random worlds, contexts and logical forms shared by the unit tests and
// the acceptance checks.

#include <functional>
#include <optional>

#include "ctxsp/datagen.hpp"
#include "ctxsp/logic.hpp"
#include "reference.hpp"

namespace support {

using ctxsp::Rng;

int uniform_int(Rng& rng, int lo, int hi);

/// A random initial world followed by `steps` random valid actions.
ctxsp::Context random_context(ctxsp::Domain d, int steps, Rng& rng);

/// A random Root whose arguments mix literals, selections, superlatives,
/// indexing and context references. Leaves are unanchored.
ctxsp::NodePtr random_root(const ctxsp::Context& c, Rng& rng);

/// Copy of `root` with every leaf replaced by `leaf(node, preorder_index)`.
ctxsp::NodePtr map_leaves(const ctxsp::NodePtr& root,
                          const std::function<ctxsp::NodePtr(const ctxsp::Node&, int)>& leaf);

int count_leaves(const ctxsp::Node& n);

/// The argument as the reference interpreter names it (beakers and people
/// by position, figures by shape).
reference::Arg to_reference(ctxsp::Value v, const ctxsp::WorldState& w);

std::optional<std::string> reference_exec(const ctxsp::WorldState& w, ctxsp::ActionName a,
                                          const std::vector<ctxsp::Value>& args);

}  // namespace support
