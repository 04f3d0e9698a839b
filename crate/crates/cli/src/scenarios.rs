//! Built-in scenarios, addressable by name in place of a config path.

use crate::config::RunConfig;
use crate::CliError;

pub const ISO_DISK_SMALL_C: &str = "\
[scenario]
name = iso_disk_small_c

[domain]
shape = disk(1)
resolution = 129

[coefficient]
field = identity

[boundary]
u0 = 0.05

[checks]
run = greens, minimize, nodal, el

[expect]
energy_max = 2.2
nodal_nonempty = true
";

pub const ISO_DISK_LARGE_C: &str = "\
[scenario]
name = iso_disk_large_c

[domain]
shape = disk(1)
resolution = 129

[coefficient]
field = identity

[boundary]
u0 = 10

[energy]
solve_tol = 1e-12
tol_grad = 1e-10

[checks]
run = greens, minimize, nodal, el

[expect]
nodal_nonempty = false
max_dev_from_const = 1e-3
";

pub const BUILTINS: [(&str, &str); 2] = [
    ("iso_disk_small_c", ISO_DISK_SMALL_C),
    ("iso_disk_large_c", ISO_DISK_LARGE_C),
];

pub fn builtin_text(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin(name: &str) -> Option<Result<RunConfig, CliError>> {
    builtin_text(name).map(RunConfig::parse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for (name, _) in BUILTINS {
            let cfg = builtin(name).unwrap().unwrap();
            assert_eq!(cfg.name, name);
            assert_eq!(cfg.resolution, 129);
        }
        assert!(builtin("nope").is_none());
    }
}
