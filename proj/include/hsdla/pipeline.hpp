#pragma once

#include <string>
#include <vector>

#include "hsdla/device.hpp"
#include "hsdla/flop_ledger.hpp"
#include "hsdla/hybrid_static.hpp"
#include "hsdla/kernels.hpp"
#include "hsdla/problem.hpp"

namespace hsdla::pipeline {

enum class Variant { Original, Refined };
enum class Strategy { Cpu, Static, Dynamic };

const char* variant_name(Variant v);
const char* strategy_name(Strategy s);
Variant parse_variant(const std::string& s);    // ConfigError on unknown
Strategy parse_strategy(const std::string& s);  // ConfigError on unknown

struct PipelineConfig {
  Variant variant = Variant::Refined;
  Strategy strategy = Strategy::Cpu;
  device::DevicePool* pool = nullptr;  // required for static/dynamic
  double split_ratio = 1.0;            // static: accelerator/CPU rate ratio m
  std::size_t block_override = 0;      // dynamic: 0 = choose_block_size
  kernels::KernelConfig kernel;        // cpu-strategy kernel settings
  device::DispatchLog* log = nullptr;
};

struct PhaseTime {
  std::string name;
  double seconds = 0.0;
};

struct HSResult {
  HermitianView H;  // lower triangle authoritative; call mirror() to densify
  HermitianView S;
  FlopLedger ledger;
  std::size_t peak_temp_bytes = 0;
  std::vector<PhaseTime> phases;
  std::vector<std::string> warnings;
};

/// Algorithm with the Cholesky branch: working copies of A and B (the two
/// backup buffers), Z loop overwriting B, restore, S with in-place U scaling,
/// then per-atom potrf deciding trmm/B_T vs hemm/B_B, finished by
/// H += B_T^H B_T and a full gemm H += A^H B_B folded into the lower triangle.
HSResult build_hs_original(const ProblemInstance& p, const PipelineConfig& cfg);

/// Reordered variant: S first through one temporary X = U B, then X reused for
/// the Z panels (her2k) and the T^[AA] A panels (herkx). No Cholesky, no
/// backups; exactly one N_A N_L x N_G buffer plus per-atom scratch.
HSResult build_hs_refined(const ProblemInstance& p, const PipelineConfig& cfg);

HSResult build_hs(const ProblemInstance& p, const PipelineConfig& cfg);

/// Closed-form flop prediction; equals the measured ledger exactly, per
/// kernel. The original/refined difference is
/// 4 n_fail N_L N_G^2 + N_A (4 N_L^3)/3 - 4 n_hpd N_L^2 N_G.
FlopLedger flop_model(const ProblemInstance& p, Variant variant);

}  // namespace hsdla::pipeline
