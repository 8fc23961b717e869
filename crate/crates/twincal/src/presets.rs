//! Built-in synthetic scenes.

use std::fmt;
use std::str::FromStr;

use twincal_core::scene::{scene_to_config, Profiles, UserGrid, DEFAULT_ANTENNAS, DEFAULT_MAX_PATHS};
use twincal_core::{Prism, Scene, Vec3};

pub const CARRIER_HZ: f64 = 3.5e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Street canyon with two cross streets; the BS sits below the rooftops.
    Canyon,
    /// Six free-standing blocks around a low, central BS.
    Blocks,
    /// No buildings.
    Open,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Canyon, Preset::Blocks, Preset::Open];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Canyon => "canyon",
            Preset::Blocks => "blocks",
            Preset::Open => "open",
        }
    }

    pub fn scene(self) -> Scene {
        match self {
            Preset::Canyon => canyon(),
            Preset::Blocks => blocks(),
            Preset::Open => open(),
        }
    }

    fn summary(self) -> &'static str {
        match self {
            Preset::Canyon => {
                "main street along x (y in [0, 20]) lined by two building rows, cross streets at\n\
                 # x in [45, 55] and [95, 105]; BS at street level below the rooftops. The baseline\n\
                 # geometry is exact, so the twins differ only in diffraction-reflection paths."
            }
            Preset::Blocks => {
                "six blocks in two rows; small cell at 3 m in the eastern cross street. The\n\
                 # baseline twin has no diffraction-reflection paths and models the array\n\
                 # orientation 4 degrees off (array_yaw_error_deg)."
            }
            Preset::Open => "free space: both twins see only the line-of-sight path.",
        }
    }

    /// Scene config text with a short descriptive header.
    pub fn config_text(self) -> String {
        format!(
            "# twincal scene preset `{}`\n# {}\n{}",
            self.name(),
            self.summary(),
            scene_to_config(&self.scene())
        )
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected canyon, blocks, or open)"))
    }
}

fn prism(x0: f64, y0: f64, x1: f64, y1: f64, h: f64) -> Prism {
    Prism::new(Vec3::new(x0, y0, 0.0), Vec3::new(x1, y1, h))
}

fn base(bs: Vec3, grid: UserGrid, buildings: Vec<Prism>) -> Scene {
    Scene {
        bs_position: bs,
        bs_array_axis: Vec3::new(1.0, 0.0, 0.0),
        carrier_freq_hz: CARRIER_HZ,
        antennas: DEFAULT_ANTENNAS,
        max_paths: DEFAULT_MAX_PATHS,
        buildings,
        grid,
        profiles: Profiles::default(),
    }
}

fn canyon() -> Scene {
    let mut buildings = Vec::new();
    for (x0, x1) in [(0.0, 45.0), (55.0, 95.0), (105.0, 150.0)] {
        buildings.push(prism(x0, -30.0, x1, 0.0, 24.0));
        buildings.push(prism(x0, 20.0, x1, 50.0, 30.0));
    }
    let grid = UserGrid {
        origin: [0.0, -30.0],
        extent: [150.0, 80.0],
        spacing: 2.0,
        user_height: 1.5,
    };
    base(Vec3::new(12.0, 10.0, 8.0), grid, buildings)
}

fn blocks() -> Scene {
    let buildings = vec![
        prism(14.0, 12.0, 34.0, 30.0, 22.0),
        prism(50.0, 10.0, 68.0, 28.0, 30.0),
        prism(86.0, 14.0, 104.0, 32.0, 18.0),
        prism(16.0, 58.0, 32.0, 78.0, 26.0),
        prism(48.0, 60.0, 70.0, 76.0, 20.0),
        prism(84.0, 56.0, 102.0, 74.0, 28.0),
    ];
    let grid = UserGrid {
        origin: [0.0, 0.0],
        extent: [120.0, 90.0],
        spacing: 2.0,
        user_height: 1.5,
    };
    let mut s = base(Vec3::new(80.0, 43.0, 3.0), grid, buildings);
    s.profiles.baseline.array_yaw_error_deg = 4.0;
    s
}

fn open() -> Scene {
    let grid = UserGrid {
        origin: [0.0, 0.0],
        extent: [60.0, 40.0],
        spacing: 2.0,
        user_height: 1.5,
    };
    base(Vec3::new(30.0, -8.0, 10.0), grid, Vec::new())
}
