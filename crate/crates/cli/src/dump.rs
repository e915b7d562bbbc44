//! Debug rasters for the first few images of each class.

use std::path::Path;

use kazefuse::fuse::{working_image, Scheme, CLASS_DIRS};
use kazefuse::hog::compute_gradients;
use kazefuse::image::{encode_pgm, encode_pgm_stretched, load_image, log_transform, GrayImage};
use kazefuse::kaze::{build_scale_space, keypoint_overlay, vector_from_space, KazeResolution};
use kazefuse::lbp::lbp_code_map;

use crate::commands::image_files;
use crate::config::{write_file, RunConfig};
use crate::error::CliError;

/// Writes `<class>_<stem>_<what>.pgm` files and returns the number of
/// images dumped. Images that fail to decode are skipped.
pub fn write_dumps(corpus: &Path, out: &Path, limit: usize, cfg: &RunConfig) -> Result<usize, CliError> {
    let (lbp, hog, kaze) = match cfg.scheme {
        Scheme::Lbp => (true, false, false),
        Scheme::Hog => (false, true, false),
        Scheme::Kaze => (false, false, true),
        Scheme::LbpKaze => (true, false, true),
        Scheme::HogKaze => (false, true, true),
    };
    let params = &cfg.extractor;
    let mut dumped = 0;
    for class in CLASS_DIRS {
        for path in image_files(&corpus.join(class))?.into_iter().take(limit) {
            let src = match load_image(&path) {
                Ok(img) => img,
                Err(e) => {
                    log::warn!("not dumping {}: {e}", path.display());
                    continue;
                }
            };
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let name = |what: &str| out.join(format!("{class}_{stem}_{what}.pgm"));
            let working = working_image(&src, params)?;
            let (w, h) = (working.width(), working.height());
            write_file(&name("working"), &encode_pgm(&working))?;
            if lbp {
                let codes = lbp_code_map(&working, &params.lbp)?;
                write_file(&name("lbp"), &encode_pgm_stretched(w, h, &codes.as_raster()))?;
            }
            if hog {
                let field = compute_gradients(&working, &params.hog)?;
                write_file(&name("hog_magnitude"), &encode_pgm_stretched(w, h, &field.magnitude))?;
            }
            if kaze {
                let input: GrayImage = match params.kaze.resolution {
                    KazeResolution::Working => working.clone(),
                    KazeResolution::Source if params.log_transform => log_transform(&src),
                    KazeResolution::Source => src.clone(),
                };
                let space = build_scale_space(&input, &params.kaze);
                for i in 0..space.levels.len() {
                    write_file(&name(&format!("kaze_level{i:02}")), &encode_pgm(&space.level_image(i)))?;
                }
                let v = vector_from_space(&space, &params.kaze);
                write_file(
                    &name("kaze_keypoints"),
                    &encode_pgm(&keypoint_overlay(&input, &v.keypoints)),
                )?;
            }
            dumped += 1;
        }
    }
    Ok(dumped)
}
