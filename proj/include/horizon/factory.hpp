#pragma once

// Strategy descriptors:
//   zero | const:0.3 | kelly | halfkelly | fkelly:f=0.25 | endpoint |
//   epsgreedy:eta=0.5,q=1 | hedge[:default6] | star2s | random | dqn:path=ckpt.json

#include <functional>
#include <memory>
#include <string>

#include "horizon/core.hpp"
#include "horizon/descriptor.hpp"
#include "horizon/dqn/agent.hpp"
#include "horizon/dqn/checkpoint.hpp"
#include "horizon/error.hpp"
#include "horizon/strategies.hpp"

namespace horizon {

using StrategyMaker = std::function<std::unique_ptr<Strategy>()>;

namespace detail {
inline StrategyMaker single(std::function<std::unique_ptr<BetRule>()> rule) {
  return [rule = std::move(rule)] { return std::make_unique<SingleTrack>(rule()); };
}
}  // namespace detail

inline StrategyMaker strategy_maker(const Descriptor& d) {
  const std::string& n = d.name;
  if (n == "zero") return detail::single([] { return std::make_unique<ZeroRule>(); });
  if (n == "const") {
    double bet = 0.0;
    if (d.has("l")) {
      bet = d.number("l");
    } else if (d.positional.size() == 1) {
      bet = Descriptor::parse_number(d.positional[0]);
    } else {
      throw UsageError("const strategy needs a bet, e.g. const:0.5", n);
    }
    return detail::single([bet] { return std::make_unique<ConstantRule>(bet); });
  }
  if (n == "kelly") return detail::single([] { return std::make_unique<KellyRule>(1.0); });
  if (n == "halfkelly") return detail::single([] { return std::make_unique<KellyRule>(0.5); });
  if (n == "fkelly") {
    const double f = d.has("f") ? d.number("f")
                     : d.positional.size() == 1 ? Descriptor::parse_number(d.positional[0])
                                                : throw UsageError("fkelly needs f=", n);
    if (!(f >= 0.0)) throw UsageError("Kelly fraction must be nonnegative", std::to_string(f));
    return detail::single([f] { return std::make_unique<KellyRule>(f); });
  }
  if (n == "endpoint") return detail::single([] { return std::make_unique<EndpointRule>(); });
  if (n == "epsgreedy") {
    const double eta = d.number_or("eta", 0.5);
    const double q = d.number_or("q", 1.0);
    if (!(eta >= 0.0 && eta < 1.0)) throw UsageError("eta must lie in [0,1)", std::to_string(eta));
    if (!(q >= 1.0) || q != static_cast<int>(q)) throw UsageError("q must be a positive integer", std::to_string(q));
    return detail::single([eta, q] { return std::make_unique<EpsGreedyRule>(eta, static_cast<int>(q)); });
  }
  if (n == "hedge") {
    if (!d.positional.empty() && d.positional[0] != "default6") throw UsageError("unknown hedge book", d.positional[0]);
    return [] { return std::make_unique<HedgeStrategy>(); };
  }
  if (n == "star2s") return detail::single([] { return std::make_unique<SignAdaptedRule>(); });
  if (n == "random") return detail::single([] { return std::make_unique<RandomActionRule>(); });
  if (n == "dqn") {
    std::string path;
    if (d.named.count("path")) {
      path = d.named.at("path");
    } else if (d.positional.size() == 1) {
      path = d.positional[0];
    } else {
      throw UsageError("dqn strategy needs path=<checkpoint.json>", n);
    }
    auto net = std::make_shared<const dqn::Mlp>(dqn::load_checkpoint(path).net);
    return detail::single([net] { return std::make_unique<dqn::DqnRule>(net); });
  }
  throw UsageError("unknown strategy '" + n + "'", n);
}

inline StrategyMaker strategy_maker(std::string_view descriptor) {
  return strategy_maker(parse_descriptor(descriptor));
}

}  // namespace horizon
