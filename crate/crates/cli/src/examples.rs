//! Bundled example configurations.

pub struct Example {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const EXAMPLES: &[Example] = &[
    Example {
        name: "burgers_admissible",
        summary: "convex flux: admissible boundary set, layers and Godunov trace",
        text: include_str!("../configs/burgers_admissible.json"),
    },
    Example {
        name: "linear2_wrong_viscosity",
        summary: "linear system whose viscosity matrix kills the stable direction",
        text: include_str!("../configs/linear2_wrong_viscosity.json"),
    },
    Example {
        name: "cubic_admissible",
        summary: "nonconvex cubic flux: admissible set and excluded companion",
        text: include_str!("../configs/cubic_admissible.json"),
    },
    Example {
        name: "elastodynamics_curve",
        summary: "p-system: curve of viscous layer limits",
        text: include_str!("../configs/elastodynamics_curve.json"),
    },
    Example {
        name: "euler_regions",
        summary: "isentropic Euler: characteristic regions of sample states",
        text: include_str!("../configs/euler_regions.json"),
    },
    Example {
        name: "lagrangian_layer",
        summary: "Lagrangian gas: closed-form Lax-Friedrichs layer recursion",
        text: include_str!("../configs/lagrangian_layer.json"),
    },
];

pub fn find(name: &str) -> Option<&'static Example> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    EXAMPLES.iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_example_parses_and_names_match() {
        for e in EXAMPLES {
            let cfg = crate::config::parse(e.text).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            assert_eq!(cfg.name, e.name);
            cfg.model().unwrap();
        }
    }
}
