use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Wrap an angle in degrees into (-180, 180].
pub fn wrap_deg(angle: f64) -> f64 {
    let mut a = angle % 360.0;
    if a <= -180.0 {
        a += 360.0;
    } else if a > 180.0 {
        a -= 360.0;
    }
    a
}

/// Polar phasor: nonnegative magnitude, angle in degrees within (-180, 180].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub magnitude: f64,
    pub angle_deg: f64,
}

impl Phasor {
    /// Builds a phasor, folding a negative magnitude into a 180 degree rotation.
    pub fn new(magnitude: f64, angle_deg: f64) -> Self {
        if magnitude < 0.0 {
            Self { magnitude: -magnitude, angle_deg: wrap_deg(angle_deg + 180.0) }
        } else {
            Self { magnitude, angle_deg: wrap_deg(angle_deg) }
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        let magnitude = z.norm();
        if magnitude == 0.0 {
            return Self { magnitude: 0.0, angle_deg: 0.0 };
        }
        Self { magnitude, angle_deg: wrap_deg(z.arg().to_degrees()) }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.magnitude, self.angle_deg.to_radians())
    }
}

impl From<Complex64> for Phasor {
    fn from(z: Complex64) -> Self {
        Phasor::from_complex(z)
    }
}
