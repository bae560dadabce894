//! A desk-scale laboratory for fault-tolerant control of an aircraft fuel
//! transfer system.
//!
//! The crate models a six-tank fuel network with pumps, engines, and a
//! shared transfer conduit ([`sim`]); wraps it as an episodic control
//! environment with a centre-of-gravity reward ([`env`]); provides a small
//! 64-bit dense neural-network stack ([`nn`]); trains a PPO actor-critic
//! over the six-bit valve action space ([`agent`]); and learns a one-step
//! surrogate of the dynamics for offline policy updates ([`surrogate`]).
//!
//! Components degrade linearly on an interval schedule, so a controller
//! must keep the aircraft balanced as pumps weaken, valves clog, and
//! engines grow thirstier.

#![allow(clippy::needless_range_loop)]

pub mod agent;
pub mod env;
pub mod nn;
pub mod sim;
pub mod surrogate;
