from icdcoder.models.base import (
    FAMILIES, Classifier, Prediction, TrainingLog, load_model)
from icdcoder.models.bow import BowClassifier, bow_predict, bow_train
from icdcoder.models.lstm import (
    LstmClassifier, LstmParameters, PositionClassMatrix, lstm_cell,
    lstm_forward, lstm_predict, lstm_train, position_class_probs)
from icdcoder.models.transformer import (
    TransformerClassifier, TransformerConfig, TransformerParameters,
    encoder_forward, finetune_classifier, masked_token_accuracy,
    mlm_pretrain, transformer_predict)
