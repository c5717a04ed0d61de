from icdcoder.helpers.seeded_command import SeededCommand
from icdcoder.helpers.model_command import ModelCommand
