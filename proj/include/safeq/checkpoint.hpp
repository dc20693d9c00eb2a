#ifndef SAFEQ_CHECKPOINT_HPP
#define SAFEQ_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "safeq/core.hpp"
#include "safeq/neural.hpp"
#include "safeq/qtargets.hpp"

namespace safeq {

// Text checkpoint files, format version 1.
//
// Line 1 header:  safeq-checkpoint v1 kind=<kind> env=<env> case=<n>
// Network body:   dims d0 ... dk / acts a0 ... a(k-1) / params, 17 digits.
// Table body:     states S actions A followed by S*A values (row-major).
//
// kind is one of: qnet, qtable, policy-net, policy-table.
struct CheckpointMeta {
  std::string kind;
  std::string env;
  int case_id = 0;
};

void save_net_checkpoint(const std::string& path, const CheckpointMeta& meta,
                         const DenseNet& net);
DenseNet load_net_checkpoint(const std::string& path,
                             CheckpointMeta* meta = nullptr);

void save_qtable_checkpoint(const std::string& path, const CheckpointMeta& meta,
                            const QTable& q);
QTable load_qtable_checkpoint(const std::string& path,
                              CheckpointMeta* meta = nullptr);

// Plain probability-table file for discrete extracted policies.
void save_policy_table(const std::string& path, const CheckpointMeta& meta,
                       const std::vector<DiscreteDistribution>& policy);
std::vector<DiscreteDistribution> load_policy_table(
    const std::string& path, CheckpointMeta* meta = nullptr);

// Header of any checkpoint file without reading the body.
CheckpointMeta peek_checkpoint(const std::string& path);

}  // namespace safeq

#endif  // SAFEQ_CHECKPOINT_HPP
