#pragma once

#include <memory>

#include "dosefind/collapse.hpp"
#include "dosefind/crm.hpp"
#include "dosefind/engine.hpp"

namespace dosefind::detail {

class Mtpi2Engine : public CompleteEngine {
 public:
  explicit Mtpi2Engine(const DesignConfig& cfg);
  Family family() const override { return Family::Mtpi2; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;

  const IntervalPartition& partition() const { return part_; }
  const CountPrior& prior() const { return *prior_; }
  Decision from_probs(const std::vector<double>& pr, int d) const;

 private:
  IntervalPartition part_;
  std::shared_ptr<CountPrior> prior_;
};

class KeyboardEngine : public CompleteEngine {
 public:
  explicit KeyboardEngine(const DesignConfig& cfg);
  Family family() const override { return Family::Keyboard; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;

  const IntervalPartition& partition() const { return part_; }
  const CountPrior& prior() const { return *prior_; }
  Decision from_probs(const std::vector<double>& pr, int d) const;

 private:
  IntervalPartition part_;
  std::shared_ptr<CountPrior> prior_;
};

class BoinEngine : public CompleteEngine {
 public:
  explicit BoinEngine(const DesignConfig& cfg);
  Family family() const override { return Family::Boin; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  Decision from_estimate(double phat, int d) const { return boin_decide(phat, bounds_, d, cfg_.grid.J); }
  const BoinBoundaries& bounds() const { return bounds_; }

 private:
  BoinBoundaries bounds_;
};

class CrmEngine : public CompleteEngine {
 public:
  explicit CrmEngine(const DesignConfig& cfg);
  Family family() const override { return Family::Crm; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  std::vector<double> estimate(const std::vector<int>& n, const std::vector<int>& m) const;

  const CrmGrid& quadrature() const { return *grid_; }
  const CrmCurve& curve() const { return curve_; }

 private:
  CrmCurve curve_;
  std::shared_ptr<CrmGrid> grid_;
};

class SpmEngine : public CompleteEngine {
 public:
  explicit SpmEngine(const DesignConfig& cfg);
  Family family() const override { return Family::Spm; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  const SpmPosterior& posterior() const { return *post_; }

 private:
  std::shared_ptr<SpmPosterior> post_;
};

class I3Engine : public CompleteEngine {
 public:
  explicit I3Engine(const DesignConfig& cfg);
  Family family() const override { return Family::I3; }
  Decision decide_counts(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
  nlohmann::json explain(const std::vector<int>& n, const std::vector<int>& m, int d) const override;
};

std::shared_ptr<DesignEngine> make_tite_engine(Family f, const DesignConfig& cfg);
std::shared_ptr<DesignEngine> make_pod_engine(Family f, const DesignConfig& cfg);

}  // namespace dosefind::detail
