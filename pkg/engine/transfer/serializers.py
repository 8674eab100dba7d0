"""
Validation of anchor manifests (anchors.json and bundle.json).
"""
from rest_framework import serializers


class AnchorEntrySerializer(serializers.Serializer):
    """One anchor microstructure and the files that belong to it."""
    name = serializers.RegexField(r'^[A-Za-z0-9_.-]+$', max_length=64)
    vf = serializers.FloatField(min_value=0.0, max_value=1.0)
    a11 = serializers.FloatField(min_value=0.0, max_value=1.0)
    a22 = serializers.FloatField(min_value=0.0, max_value=1.0)
    network = serializers.CharField(required=False)
    dataset = serializers.CharField(required=False)
    teacher = serializers.CharField(required=False)

    def validate(self, attrs):
        a33 = 1.0 - attrs['a11'] - attrs['a22']
        if not attrs['a11'] + 1e-9 >= attrs['a22'] >= a33 - 1e-9 or a33 < -1e-9:
            raise serializers.ValidationError(
                f"descriptor ({attrs['a11']}, {attrs['a22']}) is outside the orientation triangle."
            )
        return attrs


class AnchorManifestSerializer(serializers.Serializer):
    format = serializers.ChoiceField(choices=['dmn-anchors', 'dmn-anchor-bundle'])
    version = serializers.IntegerField(min_value=1, max_value=1)
    n_layers = serializers.IntegerField(min_value=2, required=False)
    anchors = AnchorEntrySerializer(many=True)

    def validate_anchors(self, value):
        names = [a['name'] for a in value]
        if len(set(names)) != len(names):
            raise serializers.ValidationError('anchor names must be unique.')
        return value
