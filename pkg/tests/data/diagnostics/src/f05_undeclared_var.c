#include <tfhe/tfhe.h>

void encrypted_and(LweSample* result, const LweSample* a, const LweSample* b,
                   const TFheGateBootstrappingCloudKeySet* cloud) {
    bootsAND(result, a, b, bk);
}
