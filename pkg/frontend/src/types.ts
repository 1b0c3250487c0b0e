export interface FeatureValue {
  name: string;
  value: number;
}

export interface PredictResponse {
  features: FeatureValue[];
  model_id: string;
  layer: number;
  norm_space: string;
}

export interface ModelInfo {
  model_id: string;
  source_model: string;
  layer: number;
  norm_space: string;
  feature_count: number;
}

export interface PredictRequest {
  sentence: string;
  word: string;
  occurrence: number;
  model_id: string;
}
