use serde::{Deserialize, Serialize};

/// Normalized driving command: steering in `[-1, 1]` (-1 is full left),
/// throttle in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub steering: f32,
    pub throttle: f32,
}

impl ControlCommand {
    pub const IDLE: ControlCommand = ControlCommand {
        steering: 0.0,
        throttle: 0.0,
    };

    /// Clamps into range and reports whether anything had to change.
    /// Non-finite components become zero.
    pub fn clamped(steering: f32, throttle: f32) -> (ControlCommand, bool) {
        let s = if steering.is_finite() { steering.clamp(-1.0, 1.0) } else { 0.0 };
        let t = if throttle.is_finite() { throttle.clamp(0.0, 1.0) } else { 0.0 };
        let changed = s != steering || t != throttle;
        (
            ControlCommand {
                steering: s,
                throttle: t,
            },
            changed,
        )
    }

    pub fn new(steering: f32, throttle: f32) -> ControlCommand {
        Self::clamped(steering, throttle).0
    }

    pub fn in_bounds(&self) -> bool {
        (-1.0..=1.0).contains(&self.steering) && (0.0..=1.0).contains(&self.throttle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_and_flags() {
        let (c, flagged) = ControlCommand::clamped(1.7, -0.2);
        assert!(flagged);
        assert_eq!(c, ControlCommand { steering: 1.0, throttle: 0.0 });
        let (c, flagged) = ControlCommand::clamped(-0.3, 0.4);
        assert!(!flagged);
        assert_eq!(c.steering, -0.3);
        let (c, flagged) = ControlCommand::clamped(f32::NAN, 0.5);
        assert!(flagged && c.steering == 0.0);
    }
}
