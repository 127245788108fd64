void complexFunction(void) {
    printf("complex");
}

int main(void) {
    int callVal = nondet_int();
    if (callVal > 0) {
        complexFunction();
    } else {
        int i = 0;
        for (i = 0; i < 10 && callVal <= 0; i++) {
            if (i == 2) {
                i = -1;
            }
        }
    }
    return callVal;
}
