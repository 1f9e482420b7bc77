//! Versioned prompt assets for the remote generator and critic.

pub const ADVISOR_VERSION: &str = "advisor_v1";
pub const ARCHITECT_VERSION: &str = "architect_v1";

pub const ADVISOR_SYSTEM: &str = include_str!("../assets/advisor_v1.txt");
pub const ARCHITECT_SYSTEM: &str = include_str!("../assets/architect_v1.txt");
