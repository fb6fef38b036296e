#pragma once

#include <iosfwd>
#include <string>

#include "cmpg/types.hpp"

namespace cmpg {

/// Text format for game specs. Whitespace-separated tokens, '#' starts a
/// comment running to end of line. Layout:
///
///   cmpg-game-v1
///   states S
///   agents M
///   actions A_0 ... A_{M-1}
///   objective minimize|maximize
///   horizon random            (or: horizon fixed T_e)
///   threshold ALPHA           (the token "inf" is accepted)
///   initial_dist S values
///   rewards AGENT             followed by S*A values, state-major
///   ...                       (one block per agent)
///   cost                      S*A values
///   stop                      S*A values
///   transitions               S*A*S values, ((s*A + a)*S + s')-ordered
///   end
///
/// A is the joint action count and flat joint indices are row-major over
/// agents with agent 0 outermost (see JointActionIndexer). Loading
/// validates the spec and throws std::runtime_error listing the first
/// violated invariants.
GameSpec load_game(std::istream& in);
GameSpec load_game_file(const std::string& path);
void save_game(std::ostream& out, const GameSpec& spec);
void save_game_file(const std::string& path, const GameSpec& spec);

/// Policy checkpoints use the same token syntax:
///
///   cmpg-policy-v1
///   agents M
///   states S
///   actions A_0 ... A_{M-1}
///   xi XI
///   agent 0                   followed by S rows of A_0 values
///   ...
///   end
JointPolicy load_policy(std::istream& in);
JointPolicy load_policy_file(const std::string& path);
void save_policy(std::ostream& out, const JointPolicy& policy);
void save_policy_file(const std::string& path, const JointPolicy& policy);

}  // namespace cmpg
