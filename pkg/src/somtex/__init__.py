"""Texture features from gray-level co-occurrence matrices under three ROI
strategies, Fisherfaces reduction, SOM prototype features and
cross-validated evaluation, for medical image categorization."""

from .dataset import (DatasetManifest, DecodeError, GrayImage, ImageRecord, crop_black_border,
                      decode_pgm, encode_pgm, equalize_histogram, parse_mias_index, preprocess,
                      quantize_gray_levels)
from .evaluation import (ConfusionMatrix, EvalReport, FoldPlan, classify_1nn, classify_gnb,
                         evaluate_classifiers, evaluate_pipeline, kfold_split)
from .fisherfaces import FisherModel, compute_scatter, fit_fisherfaces, fit_pca, project
from .glcm import Glcm, TextureFeatures, compute_glcm, features_from_glcm
from .roi import (FeatureDataset, PartitionConfig, assemble_dataset, extract_bloc_wise,
                  extract_fixed_bloc, extract_pixel_wise, kmeans, split_grid)
from .som import (SomConfig, SomMap, augment, find_bmu, init_som, neighborhood,
                  quantize_replace, train)
from .arff import export_arff, parse_arff

__version__ = "0.1.0"
