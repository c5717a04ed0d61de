from icdcoder import core, params


class SeededCommandOptions(core.Options):

    def __init__(self, meta, *args, **kwargs):
        super(SeededCommandOptions, self).__init__(meta=meta, *args, **kwargs)
        self.seed_name = getattr(meta, 'seed_name', 'seed')

    def post_process(self):
        named = [name for name in self.named_params
                 if name not in self.parent_params]
        if self.seed_name in named:
            raise TypeError(
                "%s can not explicitly define a parameter called %r" %
                (self.name, self.seed_name))
        param = params.IntegerParam(
            named=True, min_value=0,
            help='Seed for every random draw; reruns with the same seed '
                 'write byte-identical artifacts.')
        param.name = self.seed_name
        self.named_params[self.seed_name] = param
        super(SeededCommandOptions, self).post_process()


class SeededCommandMetaclass(core.DeclarativeParamsMetaclass):
    options_class = SeededCommandOptions


class SeededCommand(core.BaseCommand, metaclass=SeededCommandMetaclass):
    """
    A command whose results depend on random draws, so ``--seed`` is
    mandatory.
    """

    def handle(self, data):
        return self.run(data, data[self._meta.seed_name])

    def run(self, data, seed):
        raise NotImplementedError(
            "SeededCommand subclasses must implement this method.")
