//! Appendix results of the partial-data sweep: three per-seed rows and the
//! printed average per (dataset, fine-tune setting, predict setting).

use treu_eval::dataset::DatasetKind;
use treu_eval::format::Setting;

pub struct Table4Block {
    pub dataset: DatasetKind,
    pub finetune: Setting,
    pub predict: Setting,
    pub seeds: [[f64; 10]; 3],
    pub average: [f64; 10],
}

pub const TABLE4: [Table4Block; 8] = [
    Table4Block {
        dataset: DatasetKind::CosEV1_0,
        finetune: Setting::Baseline,
        predict: Setting::Baseline,
        seeds: [
            [0.583, 0.656, 0.638, 0.658, 0.661, 0.670, 0.674, 0.678, 0.697, 0.676],
            [0.550, 0.644, 0.664, 0.650, 0.666, 0.667, 0.667, 0.682, 0.668, 0.682],
            [0.584, 0.64, 0.64, 0.655, 0.670, 0.675, 0.677, 0.66, 0.674, 0.68],
        ],
        average: [0.572, 0.647, 0.647, 0.655, 0.665, 0.671, 0.673, 0.673, 0.680, 0.679],
    },
    Table4Block {
        dataset: DatasetKind::CosEV1_0,
        finetune: Setting::Baseline,
        predict: Setting::Infusion,
        seeds: [
            [0.586, 0.586, 0.625, 0.633, 0.596, 0.621, 0.663, 0.655, 0.649, 0.676],
            [0.561, 0.591, 0.642, 0.609, 0.656, 0.630, 0.618, 0.650, 0.641, 0.652],
            [0.525, 0.6, 0.631, 0.62, 0.631, 0.614, 0.658, 0.595, 0.647, 0.665],
        ],
        average: [0.545, 0.592, 0.632, 0.621, 0.628, 0.622, 0.647, 0.634, 0.645, 0.664],
    },
    Table4Block {
        dataset: DatasetKind::CosEV1_0,
        finetune: Setting::Infusion,
        predict: Setting::Baseline,
        seeds: [
            [0.588, 0.622, 0.617, 0.613, 0.635, 0.616, 0.615, 0.625, 0.652, 0.629],
            [0.592, 0.614, 0.573, 0.610, 0.650, 0.592, 0.632, 0.64, 0.610, 0.64],
            [0.601, 0.609, 0.615, 0.618, 0.631, 0.629, 0.641, 0.635, 0.652, 0.634],
        ],
        average: [0.594, 0.615, 0.602, 0.614, 0.639, 0.612, 0.629, 0.633, 0.638, 0.634],
    },
    Table4Block {
        dataset: DatasetKind::CosEV1_0,
        finetune: Setting::Infusion,
        predict: Setting::Infusion,
        seeds: [
            [0.867, 0.874, 0.884, 0.889, 0.902, 0.894, 0.890, 0.886, 0.910, 0.904],
            [0.875, 0.888, 0.881, 0.890, 0.898, 0.901, 0.9, 0.901, 0.896, 0.895],
            [0.877, 0.885, 0.887, 0.887, 0.903, 0.907, 0.898, 0.910, 0.894, 0.908],
        ],
        average: [0.873, 0.882, 0.884, 0.889, 0.901, 0.901, 0.896, 0.899, 0.900, 0.902],
    },
    Table4Block {
        dataset: DatasetKind::Ecqa,
        finetune: Setting::Baseline,
        predict: Setting::Baseline,
        seeds: [
            [0.495, 0.522, 0.528, 0.553, 0.550, 0.550, 0.554, 0.569, 0.561, 0.562],
            [0.471, 0.505, 0.525, 0.533, 0.549, 0.561, 0.558, 0.572, 0.572, 0.572],
            [0.469, 0.511, 0.533, 0.541, 0.553, 0.545, 0.569, 0.564, 0.566, 0.565],
        ],
        average: [0.478, 0.513, 0.529, 0.542, 0.551, 0.552, 0.560, 0.568, 0.566, 0.566],
    },
    Table4Block {
        dataset: DatasetKind::Ecqa,
        finetune: Setting::Baseline,
        predict: Setting::Infusion,
        seeds: [
            [0.664, 0.672, 0.710, 0.716, 0.692, 0.702, 0.708, 0.722, 0.684, 0.701],
            [0.685, 0.682, 0.673, 0.697, 0.681, 0.682, 0.694, 0.677, 0.699, 0.641],
            [0.678, 0.715, 0.693, 0.648, 0.706, 0.713, 0.686, 0.685, 0.688, 0.711],
        ],
        average: [0.675, 0.690, 0.692, 0.687, 0.693, 0.699, 0.696, 0.695, 0.690, 0.684],
    },
    Table4Block {
        dataset: DatasetKind::Ecqa,
        finetune: Setting::Infusion,
        predict: Setting::Baseline,
        seeds: [
            [0.417, 0.406, 0.402, 0.395, 0.381, 0.379, 0.365, 0.379, 0.375, 0.374],
            [0.381, 0.363, 0.367, 0.366, 0.368, 0.400, 0.385, 0.349, 0.368, 0.371],
            [0.381, 0.386, 0.345, 0.341, 0.369, 0.376, 0.361, 0.359, 0.386, 0.334],
        ],
        average: [0.393, 0.385, 0.371, 0.367, 0.373, 0.385, 0.370, 0.362, 0.376, 0.360],
    },
    Table4Block {
        dataset: DatasetKind::Ecqa,
        finetune: Setting::Infusion,
        predict: Setting::Infusion,
        seeds: [
            [0.974, 0.983, 0.983, 0.989, 0.985, 0.988, 0.989, 0.984, 0.990, 0.992],
            [0.984, 0.985, 0.983, 0.981, 0.990, 0.989, 0.991, 0.985, 0.990, 0.983],
            [0.984, 0.982, 0.984, 0.981, 0.989, 0.987, 0.988, 0.989, 0.989, 0.989],
        ],
        average: [0.980, 0.983, 0.983, 0.984, 0.988, 0.988, 0.989, 0.986, 0.990, 0.988],
    },
];
