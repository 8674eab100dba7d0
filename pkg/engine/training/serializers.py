"""
Validation of training configuration files.
"""
from rest_framework import serializers

from config.exceptions import ConfigurationError

from .optimizer import TrainConfig


class TrainConfigSerializer(serializers.Serializer):
    """Serializer for a JSON training configuration."""
    epochs = serializers.IntegerField(min_value=0, required=False)
    n_batches = serializers.IntegerField(min_value=1, required=False)
    lr0 = serializers.FloatField(required=False)
    bold_up = serializers.FloatField(required=False)
    bold_down = serializers.FloatField(required=False)
    lr_min = serializers.FloatField(required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    n_layers = serializers.IntegerField(min_value=2, max_value=12, required=False)
    log_every = serializers.IntegerField(min_value=1, required=False)

    def get_fields(self):
        fields = super().get_fields()
        # 'lambda' is a keyword and cannot be a class attribute.
        fields['lambda'] = serializers.FloatField(min_value=0.0, required=False)
        return fields

    def validate_lr0(self, value):
        if value <= 0:
            raise serializers.ValidationError('lr0 must be positive.')
        return value

    def validate_lr_min(self, value):
        if value <= 0:
            raise serializers.ValidationError('lr_min must be positive.')
        return value

    def validate(self, attrs):
        up = attrs.get('bold_up', 1.05)
        down = attrs.get('bold_down', 0.5)
        if not (up > 1.0 > down > 0.0):
            raise serializers.ValidationError('bold driver factors need bold_up > 1 > bold_down > 0.')
        return attrs

    def to_config(self) -> TrainConfig:
        data = dict(self.validated_data)
        if 'lambda' in data:
            data['lam'] = data.pop('lambda')
        return TrainConfig(**data)


def parse_train_config(payload: dict) -> TrainConfig:
    serializer = TrainConfigSerializer(data=payload)
    if not serializer.is_valid():
        raise ConfigurationError(f'invalid training config: {serializer.errors}')
    return serializer.to_config()
