#pragma once

#include "exr/uad/record.hpp"

namespace exr::test {

/// Discrete, fully populated record built from the descriptor table's literals.
inline ActionRecord sample_record() {
  ActionRecord r;
  r.id = "A000001";
  r.name = "Touch";
  r.type = ActionType::Discrete;
  r.intent = "Inspect object";
  r.user = "User1";
  r.location = {Transform::parse("(Pos(0,0,0), Rot(0,5,5))")};
  r.trigger_source = "XRController";
  r.start_time = Timestamp::parse("240801:092855:031");
  r.duration = TimeDelta::parse("000000:000135:328");
  r.referent_name = "Cube1";
  r.referent_type = RealityType::Virtual;
  r.referent_location = {Transform::parse("(Pos(1,0.5,2), Rot(0,0,0))")};
  r.context_type = RealityType::Virtual;
  return r;
}

}  // namespace exr::test
